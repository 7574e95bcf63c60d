use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One class of a label palette, as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub id: u32,
    pub name: String,
    pub color: [u8; 3],
    #[serde(default)]
    pub is_person: bool,
}

/// Class table shared by every raster of a configuration.
///
/// Ids are exactly `0..k` and colors are unique. At most one entry carries
/// the person flag; that class is the one the insertion stage draws and the
/// benchmark scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct LabelPalette {
    entries: Vec<PaletteEntry>,
}

impl LabelPalette {
    pub fn new(mut entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Palette("palette has no entries".into()));
        }
        if entries.len() > 256 {
            return Err(Error::Palette(format!("{} classes do not fit an 8-bit map", entries.len())));
        }
        entries.sort_by_key(|e| e.id);
        for (expected, e) in entries.iter().enumerate() {
            if e.id as usize != expected {
                return Err(Error::Palette(format!(
                    "class ids must be exactly 0..{} without gaps or duplicates (found {} at position {expected})",
                    entries.len(),
                    e.id
                )));
            }
        }
        for (i, a) in entries.iter().enumerate() {
            if let Some(b) = entries[i + 1..].iter().find(|b| b.color == a.color) {
                return Err(Error::Palette(format!("classes {} and {} share color {:?}", a.id, b.id, a.color)));
            }
        }
        if entries.iter().filter(|e| e.is_person).count() > 1 {
            return Err(Error::Palette("more than one entry sets is_person".into()));
        }
        Ok(Self { entries })
    }

    pub fn num_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn entry(&self, id: u32) -> Option<&PaletteEntry> {
        self.entries.get(id as usize)
    }

    pub fn person_id(&self) -> Option<u32> {
        self.entries.iter().find(|e| e.is_person).map(|e| e.id)
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn color(&self, id: u32) -> Option<[u8; 3]> {
        self.entry(id).map(|e| e.color)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<PaletteEntry> = serde_json::from_str(text)?;
        Self::new(entries)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::path(path, e))
    }

    /// Eight-class palette used by the toy scenes.
    pub fn toy() -> Self {
        let table: [(&str, [u8; 3]); 8] = [
            ("void", [0, 0, 0]),
            ("road", [128, 64, 128]),
            ("sidewalk", [244, 35, 232]),
            ("building", [70, 70, 70]),
            ("vegetation", [107, 142, 35]),
            ("sky", [70, 130, 180]),
            ("person", [220, 20, 60]),
            ("car", [0, 0, 142]),
        ];
        Self::from_table(&table, "person")
    }

    /// The 34 Cityscapes label ids. Ids 0-4 and 17/18 share a color
    /// upstream; the duplicates are nudged by one unit in the blue (or last)
    /// channel so colors stay unique.
    pub fn cityscapes() -> Self {
        let table: [(&str, [u8; 3]); 34] = [
            ("unlabeled", [0, 0, 0]),
            ("ego vehicle", [0, 0, 1]),
            ("rectification border", [0, 0, 2]),
            ("out of roi", [0, 0, 3]),
            ("static", [0, 0, 4]),
            ("dynamic", [111, 74, 0]),
            ("ground", [81, 0, 81]),
            ("road", [128, 64, 128]),
            ("sidewalk", [244, 35, 232]),
            ("parking", [250, 170, 160]),
            ("rail track", [230, 150, 140]),
            ("building", [70, 70, 70]),
            ("wall", [102, 102, 156]),
            ("fence", [190, 153, 153]),
            ("guard rail", [180, 165, 180]),
            ("bridge", [150, 100, 100]),
            ("tunnel", [150, 120, 90]),
            ("pole", [153, 153, 153]),
            ("polegroup", [153, 153, 154]),
            ("traffic light", [250, 170, 30]),
            ("traffic sign", [220, 220, 0]),
            ("vegetation", [107, 142, 35]),
            ("terrain", [152, 251, 152]),
            ("sky", [70, 130, 180]),
            ("person", [220, 20, 60]),
            ("rider", [255, 0, 0]),
            ("car", [0, 0, 142]),
            ("truck", [0, 0, 70]),
            ("bus", [0, 60, 100]),
            ("caravan", [0, 0, 90]),
            ("trailer", [0, 0, 110]),
            ("train", [0, 80, 100]),
            ("motorcycle", [0, 0, 230]),
            ("bicycle", [119, 11, 32]),
        ];
        Self::from_table(&table, "person")
    }

    fn from_table(table: &[(&str, [u8; 3])], person: &str) -> Self {
        let entries = table
            .iter()
            .enumerate()
            .map(|(id, (name, color))| PaletteEntry {
                id: id as u32,
                name: (*name).to_string(),
                color: *color,
                is_person: *name == person,
            })
            .collect();
        Self::new(entries).expect("built-in palette is valid")
    }
}

impl<'de> Deserialize<'de> for LabelPalette {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<PaletteEntry>::deserialize(d)?;
        LabelPalette::new(entries).map_err(serde::de::Error::custom)
    }
}

/// Which palette classes play the layers of a toy scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRoles {
    pub sky: u32,
    pub building: u32,
    pub road: u32,
    pub person: u32,
}

impl SceneRoles {
    /// Looks the roles up by class name (`sky`, `building`, `road`) and the
    /// person flag.
    pub fn from_palette(palette: &LabelPalette) -> Result<Self> {
        let find =
            |name: &str| palette.id_of(name).ok_or_else(|| Error::Palette(format!("palette has no '{name}' class")));
        Ok(Self {
            sky: find("sky")?,
            building: find("building")?,
            road: find("road")?,
            person: palette.person_id().ok_or_else(|| Error::Palette("palette has no person class".into()))?,
        })
    }

    pub fn validate(&self, palette: &LabelPalette) -> Result<()> {
        let k = palette.num_classes();
        for id in [self.sky, self.building, self.road, self.person] {
            if id as usize >= k {
                return Err(Error::InvalidClass { class_id: id, k });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: u32, color: [u8; 3], is_person: bool) -> PaletteEntry {
        PaletteEntry { id, name: format!("c{id}"), color, is_person }
    }

    #[test]
    fn builtin_palettes_are_valid() {
        assert_eq!(LabelPalette::toy().num_classes(), 8);
        let cs = LabelPalette::cityscapes();
        assert_eq!(cs.num_classes(), 34);
        assert_eq!(cs.person_id(), Some(24));
        assert_eq!(cs.id_of("road"), Some(7));
    }

    #[test]
    fn rejects_gaps_duplicate_colors_and_two_persons() {
        let gap = vec![entry(0, [0, 0, 0], false), entry(2, [1, 1, 1], false)];
        assert!(matches!(LabelPalette::new(gap), Err(Error::Palette(_))));
        let dup = vec![entry(0, [0, 0, 0], false), entry(1, [0, 0, 0], false)];
        assert!(matches!(LabelPalette::new(dup), Err(Error::Palette(_))));
        let two = vec![entry(0, [0, 0, 0], true), entry(1, [1, 0, 0], true)];
        assert!(matches!(LabelPalette::new(two), Err(Error::Palette(_))));
    }

    #[test]
    fn json_schema_roundtrip() {
        let text = r#"[{"id":1,"name":"person","color":[220,20,60],"is_person":true},
                       {"id":0,"name":"road","color":[128,64,128],"is_person":false}]"#;
        let p = LabelPalette::from_json(text).unwrap();
        assert_eq!(p.entries()[0].name, "road");
        assert_eq!(p.person_id(), Some(1));
        let again = LabelPalette::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn roles_from_names() {
        let roles = SceneRoles::from_palette(&LabelPalette::toy()).unwrap();
        assert_eq!((roles.road, roles.building, roles.sky, roles.person), (1, 3, 5, 6));
    }
}
