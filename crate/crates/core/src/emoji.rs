//! Emoji name table and glyph rasters.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use crate::image::Image;

const TABLE_JSON: &str = include_str!("../assets/emoji/emoji.json");

const EMBEDDED: &[(&str, &[u8])] = &[
    ("angry_face.png", include_bytes!("../assets/emoji/angry_face.png")),
    ("crying_face.png", include_bytes!("../assets/emoji/crying_face.png")),
    ("face_with_open_mouth.png", include_bytes!("../assets/emoji/face_with_open_mouth.png")),
    ("face_with_tongue.png", include_bytes!("../assets/emoji/face_with_tongue.png")),
    ("frowning_face.png", include_bytes!("../assets/emoji/frowning_face.png")),
    ("grinning_face.png", include_bytes!("../assets/emoji/grinning_face.png")),
    ("neutral_face.png", include_bytes!("../assets/emoji/neutral_face.png")),
    ("sleeping_face.png", include_bytes!("../assets/emoji/sleeping_face.png")),
    ("smiling_face.png", include_bytes!("../assets/emoji/smiling_face.png")),
    ("smiling_face_with_heart_eyes.png", include_bytes!("../assets/emoji/smiling_face_with_heart_eyes.png")),
    ("smiling_face_with_sunglasses.png", include_bytes!("../assets/emoji/smiling_face_with_sunglasses.png")),
    ("winking_face.png", include_bytes!("../assets/emoji/winking_face.png")),
];

#[derive(Debug, Clone, Default)]
pub struct EmojiTable {
    glyphs: BTreeMap<String, Arc<Image>>,
}

impl EmojiTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static EmojiTable {
        static TABLE: OnceLock<EmojiTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let names: BTreeMap<String, String> =
                serde_json::from_str(TABLE_JSON).expect("embedded emoji table is valid JSON");
            let mut glyphs = BTreeMap::new();
            for (name, file) in names {
                let bytes = EMBEDDED
                    .iter()
                    .find(|(f, _)| *f == file)
                    .unwrap_or_else(|| panic!("emoji asset {file} not embedded"))
                    .1;
                let img = Image::decode(bytes).expect("embedded emoji decodes");
                glyphs.insert(name, Arc::new(img));
            }
            EmojiTable { glyphs }
        })
    }

    /// Loads `emoji.json` (name → PNG file) from `dir`.
    pub fn load_dir(dir: &Path) -> std::io::Result<EmojiTable> {
        let raw = std::fs::read_to_string(dir.join("emoji.json"))?;
        let names: BTreeMap<String, String> =
            serde_json::from_str(&raw).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let mut glyphs = BTreeMap::new();
        for (name, file) in names {
            let bytes = std::fs::read(dir.join(&file))?;
            let img = Image::decode(&bytes)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{file}: {e}")))?;
            glyphs.insert(name, Arc::new(img));
        }
        Ok(EmojiTable { glyphs })
    }

    /// Looks a glyph up by name. `:`-wrapped names and case differences are tolerated.
    pub fn get(&self, name: &str) -> Option<&Arc<Image>> {
        let key = name.trim().trim_matches(':').to_ascii_lowercase().replace([' ', '-'], "_");
        self.glyphs.get(&key)
    }

    pub fn names(&self) -> Vec<String> {
        self.glyphs.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_has_required_names() {
        let t = EmojiTable::builtin();
        assert!(t.len() >= 10);
        for n in ["face_with_tongue", "winking_face", "smiling_face"] {
            assert!(t.get(n).is_some(), "{n}");
        }
        assert!(t.get(":Winking Face:").is_some());
        assert!(t.get("unicorn").is_none());
    }

    #[test]
    fn glyphs_touch_all_four_edges() {
        for name in EmojiTable::builtin().names() {
            let g = EmojiTable::builtin().get(&name).unwrap();
            let opaque = |x, y| g.get(x, y)[3] > 0;
            let (w, h) = (g.width(), g.height());
            assert!((0..h).any(|y| opaque(0, y)) && (0..h).any(|y| opaque(w - 1, y)), "{name}");
            assert!((0..w).any(|x| opaque(x, 0)) && (0..w).any(|x| opaque(x, h - 1)), "{name}");
        }
    }

    #[test]
    fn asset_dir_loads_like_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/emoji");
        let t = EmojiTable::load_dir(&dir).unwrap();
        assert_eq!(t.names(), EmojiTable::builtin().names());
    }
}
