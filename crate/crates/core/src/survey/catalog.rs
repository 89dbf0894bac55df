use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DesignId, SurveyError};

/// One stimulus in the pool. Images are opaque locators; nothing here looks
/// inside them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignItem {
    pub id: DesignId,
    pub image_uri: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// A versioned stimulus catalog with dense ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    version: String,
    items: Vec<DesignItem>,
}

impl Catalog {
    /// Validates density and uniqueness of ids. Items may arrive in any order;
    /// they are stored sorted by id. The version is a content hash, so the
    /// same item list always maps to the same version.
    pub fn new(mut items: Vec<DesignItem>) -> Result<Self, SurveyError> {
        items.sort_by_key(|item| item.id);
        for (expected, item) in items.iter().enumerate() {
            if item.id as usize != expected {
                return Err(SurveyError::InvalidCatalog(format!(
                    "ids must be dense and unique: expected id {expected}, found {}",
                    item.id
                )));
            }
            if item.image_uri.trim().is_empty() {
                return Err(SurveyError::InvalidCatalog(format!(
                    "design {} has an empty image_uri",
                    item.id
                )));
            }
        }
        let bytes = serde_json::to_vec(&items).expect("catalog items serialize");
        let digest = Sha256::digest(&bytes);
        let version = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { version, items })
    }

    /// Parses the catalog file format: a JSON array of `{id, image_uri, tags}`.
    pub fn from_json(json: &str) -> Result<Self, SurveyError> {
        let items: Vec<DesignItem> =
            serde_json::from_str(json).map_err(|e| SurveyError::InvalidCatalog(e.to_string()))?;
        Self::new(items)
    }

    /// A catalog of `n` items pointing at `assets/design-NNN.png`.
    pub fn placeholder(n: usize) -> Self {
        let items = (0..n)
            .map(|id| DesignItem {
                id: id as DesignId,
                image_uri: format!("assets/design-{id:03}.png"),
                tags: Vec::new(),
            })
            .collect();
        Self::new(items).expect("placeholder catalog is dense")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.items).expect("catalog items serialize")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn items(&self) -> &[DesignItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: DesignId) -> Option<&DesignItem> {
        self.items.get(id as usize)
    }

    pub fn image_uris(&self, ids: &[DesignId]) -> Vec<String> {
        ids.iter()
            .filter_map(|&id| self.get(id).map(|item| item.image_uri.clone()))
            .collect()
    }
}
