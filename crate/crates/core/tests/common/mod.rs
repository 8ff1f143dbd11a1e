//! Shared synthetic-document generator for the integration suites.
//!
//! Documents are random text-like strokes on degraded paper: a base
//! intensity with a linear shading gradient, strokes of varying darkness
//! (fading ink), a light blur, and Gaussian pixel noise. The ground truth
//! is the clean stroke mask.

use docqs::imaging::{BinaryImage, GrayImage};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub const DOC_SIZE: usize = 96;

pub fn synth_document(rng: &mut ChaCha12Rng) -> (GrayImage, BinaryImage) {
    let (w, h) = (DOC_SIZE, DOC_SIZE);
    let base = rng.gen_range(0.70..0.92);
    let gx = rng.gen_range(-0.10..0.10);
    let gy = rng.gen_range(-0.10..0.10);
    let mut intensity = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            intensity[y * w + x] = base + gx * x as f64 / w as f64 + gy * y as f64 / h as f64;
        }
    }

    let mut ink = vec![false; w * h];
    let strokes = rng.gen_range(6..14);
    for _ in 0..strokes {
        let x0 = rng.gen_range(4.0..(w as f64 - 4.0));
        let y0 = rng.gen_range(4.0..(h as f64 - 4.0));
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let length = rng.gen_range(10.0..40.0);
        let thickness = rng.gen_range(1usize..=2);
        let darkness = rng.gen_range(0.03..0.42);
        let steps = (length * 2.0) as usize;
        for s in 0..steps {
            let t = s as f64 / 2.0;
            let cx = x0 + angle.cos() * t;
            let cy = y0 + angle.sin() * t;
            for dy in 0..thickness {
                for dx in 0..thickness {
                    let px = cx as i64 + dx as i64;
                    let py = cy as i64 + dy as i64;
                    if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                        let idx = py as usize * w + px as usize;
                        ink[idx] = true;
                        intensity[idx] = darkness;
                    }
                }
            }
        }
    }

    // Light 3x3 box blur softens stroke edges.
    let mut blurred = intensity.clone();
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            let mut count = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let px = x as i64 + dx;
                    let py = y as i64 + dy;
                    if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                        sum += intensity[py as usize * w + px as usize];
                        count += 1.0;
                    }
                }
            }
            blurred[y * w + x] = sum / count;
        }
    }

    // Gaussian pixel noise via Box-Muller.
    let sigma = rng.gen_range(0.01..0.07);
    for v in blurred.iter_mut() {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let gauss = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        *v = (*v + sigma * gauss).clamp(0.0, 1.0);
    }

    (
        GrayImage::from_intensities(w, h, &blurred).expect("valid dimensions"),
        BinaryImage::from_mask(w, h, ink).expect("valid dimensions"),
    )
}

/// A random odd Sauvola window in [3, 31] and sensitivity in [0.01, 0.6].
pub fn random_sauvola_params(rng: &mut ChaCha12Rng) -> docqs::binarize::SauvolaParams {
    let half = rng.gen_range(1usize..=15);
    let k = rng.gen_range(0.01..0.6);
    docqs::binarize::SauvolaParams::new(2 * half + 1, k).expect("bounds respected")
}
