use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{io_err, Class, DatasetManifest, ManifestEntry, Result};
use crate::imaging::{write_pgm, GrayImage};

/// Textured CT-like phantom: a bright body disc with two dark lung fields
/// on a noisy background. Non-severe scans add a few opacities in the lower
/// lung fields; severe scans add more, larger and denser ones over the upper
/// and middle fields.
pub fn synthetic_image(class: Class, side: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = side as f64;
    let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-0.03..0.03) * s;
    let (cx, cy) = (0.5 * s + jitter(&mut rng), 0.5 * s + jitter(&mut rng));
    let lungs = [
        (cx - 0.2 * s, cy, 0.14 * s, 0.3 * s),
        (cx + 0.2 * s, cy, 0.14 * s, 0.3 * s),
    ];
    // Opacity count, radius, peak gain and vertical extent (in lung radii).
    let (count, radius, gain, rows) = match class {
        Class::NonCovid => (0, 0.0, 0.0, 0.0..1.0),
        Class::NonSevere => (rng.gen_range(2..=3), 0.07 * s, 70.0, 0.2..0.8),
        Class::Severe => (rng.gen_range(4..=6), 0.09 * s, 110.0, -0.8..0.1),
    };
    let mut blobs = Vec::with_capacity(count);
    for i in 0..count {
        let (lx, ly, rx, ry) = lungs[i % 2];
        let dy = rng.gen_range(rows.clone());
        let dx = rng.gen_range(-0.6..0.6);
        let r = radius * rng.gen_range(0.8..1.2);
        blobs.push((lx + dx * rx, ly + dy * ry, r));
    }
    let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_7e47);
    GrayImage::from_fn(side, side, |y, x| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let body = ((px - cx) / (0.45 * s)).powi(2) + ((py - cy) / (0.42 * s)).powi(2) <= 1.0;
        let mut v: f64 = if body { 150.0 } else { 20.0 };
        if lungs
            .iter()
            .any(|&(lx, ly, rx, ry)| ((px - lx) / rx).powi(2) + ((py - ly) / ry).powi(2) <= 1.0)
        {
            v = 45.0;
        }
        for &(bx, by, r) in &blobs {
            let d2 = ((px - bx).powi(2) + (py - by).powi(2)) / (r * r);
            if d2 < 4.0 {
                v += gain * (-d2).exp();
            }
        }
        v += noise.gen_range(-18.0..18.0);
        v.round().clamp(0.0, 255.0) as u8
    })
    .expect("side is positive")
}

/// Writes `per_class` phantoms per class as
/// `<dir>/<class>/img_NNNN.pgm` and returns their manifest.
pub fn generate_synthetic(dir: &Path, per_class: usize, side: usize, seed: u64) -> Result<DatasetManifest> {
    let mut entries = Vec::with_capacity(3 * per_class);
    for class in Class::ALL {
        let class_dir = dir.join(class.name());
        std::fs::create_dir_all(&class_dir).map_err(io_err(&class_dir))?;
        for i in 0..per_class {
            let name = format!("img_{i:04}.pgm");
            let path = class_dir.join(&name);
            let img_seed = seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add((class.label() * 1_000_003 + i) as u64);
            write_pgm(&synthetic_image(class, side, img_seed), &path)?;
            entries.push(ManifestEntry {
                id: format!("{}/{name}", class.name()),
                path,
                class,
            });
        }
    }
    DatasetManifest::from_entries(entries, format!("synthetic seed={seed} per_class={per_class} side={side}"))
}
