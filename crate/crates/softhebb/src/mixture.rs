//! JSON form of a synthetic mixture spec.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use softhebb_core::oracle::MixtureSpec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDoc {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// One row of `n` values per component; normalized on load.
    pub centroids: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
    pub concentration: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl MixtureDoc {
    pub fn from_spec(spec: &MixtureSpec) -> Self {
        Self {
            n: spec.dim(),
            k: spec.components(),
            centroids: (0..spec.components()).map(|k| spec.centroid(k).to_vec()).collect(),
            priors: spec.priors().to_vec(),
            concentration: spec.concentration(),
            seed: spec.seed,
        }
    }

    pub fn to_spec(&self) -> Result<MixtureSpec> {
        if self.centroids.len() != self.k || self.priors.len() != self.k {
            return Err(Error::config(
                "K",
                format!("{} centroids and {} priors for K = {}", self.centroids.len(), self.priors.len(), self.k),
            ));
        }
        if let Some(row) = self.centroids.iter().find(|c| c.len() != self.n) {
            return Err(Error::config("centroids", format!("row of length {} for n = {}", row.len(), self.n)));
        }
        let flat = self.centroids.concat();
        // an explicit spec is taken as given, however close its centroids
        let mut spec = MixtureSpec::new(self.n, flat, self.priors.clone(), self.concentration, 0.0)?;
        spec.seed = self.seed;
        Ok(spec)
    }
}

pub fn save(path: &Path, spec: &MixtureSpec) -> Result<()> {
    let text = serde_json::to_string_pretty(&MixtureDoc::from_spec(spec))? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MixtureSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: MixtureDoc = serde_json::from_str(&text)?;
    doc.to_spec()
}
