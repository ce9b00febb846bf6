use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// Response vocabulary for the object-search task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Bed,
    Window,
    Chair,
    Tv,
    Sofa,
    TableNightstand,
    Door,
    WardrobeShelving,
    Lamp,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 9] = [
        ObjectClass::Bed,
        ObjectClass::Window,
        ObjectClass::Chair,
        ObjectClass::Tv,
        ObjectClass::Sofa,
        ObjectClass::TableNightstand,
        ObjectClass::Door,
        ObjectClass::WardrobeShelving,
        ObjectClass::Lamp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Bed => "bed",
            ObjectClass::Window => "window",
            ObjectClass::Chair => "chair",
            ObjectClass::Tv => "tv",
            ObjectClass::Sofa => "sofa",
            ObjectClass::TableNightstand => "table_nightstand",
            ObjectClass::Door => "door",
            ObjectClass::WardrobeShelving => "wardrobe_shelving",
            ObjectClass::Lamp => "lamp",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = String;

    /// Accepts the snake_case names plus the slash spellings
    /// (`table/nightstand`, `wardrobe/shelving`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['/', ' ', '-'], "_");
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| format!("unknown object class {s:?}"))
    }
}

/// Ground-truth object counts for one scene (sidecar file next to the
/// panorama).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    pub objects: BTreeMap<ObjectClass, u32>,
}

impl Annotations {
    pub fn total(&self) -> u32 {
        self.objects.values().sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Scene(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Scene(format!("{}: {e}", path.display())))
    }
}

impl FromIterator<(ObjectClass, u32)> for Annotations {
    fn from_iter<T: IntoIterator<Item = (ObjectClass, u32)>>(iter: T) -> Self {
        Self {
            objects: iter.into_iter().filter(|&(_, n)| n > 0).collect(),
        }
    }
}
