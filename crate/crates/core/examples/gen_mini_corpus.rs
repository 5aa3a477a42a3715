//! Writes the bundled two-category mini-corpus: 60 small PNGs plus a
//! manifest.
//!
//! ```text
//! cargo run -p scentrec-core --example gen_mini_corpus -- [OUT_DIR]
//! ```

use std::fs;
use std::path::PathBuf;

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scentrec_core::domain::{Cue, CueKind, ImageDoc, InterestLabel, Patch};
use scentrec_core::ingest::{save_manifest, CorpusManifest};

struct Category {
    name: &'static str,
    prefix: &'static str,
    base: [u8; 3],
    title_words: &'static [&'static str],
    cue_words: &'static [&'static str],
    interested: bool,
}

const CATEGORIES: [Category; 2] = [
    Category {
        name: "spaghetti_bolognese",
        prefix: "sb",
        base: [178, 52, 34],
        title_words: &["spaghetti", "bolognese", "ragu", "tomato", "beef", "parmesan"],
        cue_words: &["bolognese", "sauce", "meat", "tomato", "spaghetti"],
        interested: false,
    },
    Category {
        name: "zoodles",
        prefix: "zo",
        base: [72, 164, 58],
        title_words: &["zoodles", "zucchini", "spiralized", "pesto", "basil", "courgette"],
        cue_words: &["zoodles", "zucchini", "pesto", "spiralized", "basil"],
        interested: true,
    },
];

const SHARED_WORDS: [&str; 6] = ["pasta", "dinner", "bowl", "easy", "homemade", "recipe"];
const SIZES: [(u32, u32); 4] = [(48, 36), (36, 48), (40, 40), (56, 32)];
const PER_CATEGORY: usize = 30;

fn jitter(rng: &mut ChaCha8Rng, v: u8, spread: i16) -> u8 {
    (i16::from(v) + rng.gen_range(-spread..=spread)).clamp(0, 255) as u8
}

fn main() {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/mini-corpus"));
    let images_dir = out.join("images");
    fs::create_dir_all(&images_dir).expect("create output directory");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut docs = Vec::new();

    for cat in &CATEGORIES {
        for i in 0..PER_CATEGORY {
            let id = format!("{}{:02}", cat.prefix, i + 1);
            let (w, h) = SIZES[i % SIZES.len()];
            let tint = [jitter(&mut rng, cat.base[0], 30), jitter(&mut rng, cat.base[1], 30), jitter(&mut rng, cat.base[2], 30)];
            let mut img = RgbImage::new(w, h);
            for px in img.pixels_mut() {
                *px = Rgb([jitter(&mut rng, tint[0], 24), jitter(&mut rng, tint[1], 24), jitter(&mut rng, tint[2], 24)]);
            }
            // a neutral plate band across the bottom
            for y in h * 3 / 4..h {
                for x in 0..w {
                    let g = jitter(&mut rng, 225, 12);
                    img.put_pixel(x, y, Rgb([g, g, g]));
                }
            }
            let file = format!("{id}.png");
            img.save(images_dir.join(&file)).expect("write png");

            let mut title: Vec<&str> = cat.title_words.choose_multiple(&mut rng, 2).copied().collect();
            title.push(SHARED_WORDS.choose(&mut rng).copied().unwrap());
            let description = format!(
                "{} {} with {}",
                SHARED_WORDS.choose(&mut rng).unwrap(),
                cat.title_words.choose(&mut rng).unwrap(),
                cat.title_words.choose(&mut rng).unwrap()
            );
            let mut doc = ImageDoc::new(&id, w, h);
            doc.uri = format!("images/{file}");
            doc.title = title.join(" ");
            doc.description = description;
            doc.category = Some(cat.name.to_string());
            doc.label = Some(InterestLabel::from(cat.interested));
            let (cw, ch) = (w / 2, h / 2);
            doc.cues.push(Cue {
                id: "c1".into(),
                kind: CueKind::Visual,
                region: Some(Patch::new(rng.gen_range(0..=w - cw), rng.gen_range(0..=h - ch), cw, ch)),
                terms: cat.cue_words.choose_multiple(&mut rng, 2).map(|s| s.to_string()).collect(),
            });
            if i % 3 == 0 {
                doc.cues.push(Cue {
                    id: "c2".into(),
                    kind: CueKind::Bookmark,
                    region: None,
                    terms: vec![SHARED_WORDS.choose(&mut rng).unwrap().to_string()],
                });
            }
            if i % 5 == 0 {
                doc.cues.push(Cue {
                    id: "c3".into(),
                    kind: CueKind::Text,
                    region: None,
                    terms: vec![cat.cue_words.choose(&mut rng).unwrap().to_string()],
                });
            }
            docs.push(doc);
        }
    }

    let manifest = CorpusManifest { corpus: "mini-corpus".into(), images: docs };
    save_manifest(&manifest, &out.join("manifest.json")).expect("write manifest");
    println!("wrote {} images to {}", manifest.len(), out.display());
}
