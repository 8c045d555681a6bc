use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{GeometryMode, Grid, GridFunction};

/// Independent stream `stream` of the run seeded with `seed`.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Interior node where `m₁` is largest.
fn peak(g: &Grid) -> Vec<f64> {
    let d = g.dim();
    let best = g
        .dofs()
        .iter()
        .copied()
        .max_by(|&i, &j| g.weights.nodal.m1[i].total_cmp(&g.weights.nodal.m1[j]))
        .unwrap_or(0);
    g.nodes[best][..d].to_vec()
}

/// Distance from `center` to the farthest interior node with `m > 0`, at
/// least four cells; the radius when `m` is nowhere positive.
fn positive_extent(g: &Grid, center: &[f64]) -> f64 {
    let d = g.dim();
    let r = g.geometry.radius;
    let w = &g.weights.nodal;
    let far = g
        .dofs()
        .iter()
        .filter(|&&i| w.m1[i] - w.m2[i] > 0.0)
        .map(|&i| {
            (0..d)
                .map(|k| (g.nodes[i][k] - center[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    match far {
        Some(e) => e.max(4.0 * r / g.geometry.resolution as f64).min(r),
        None => r,
    }
}

pub(crate) fn cutoff(g: &Grid, x: &[f64]) -> f64 {
    let r = g.geometry.radius;
    match g.geometry.mode {
        GeometryMode::RadialN => (1.0 - (x[0] / r).powi(2)).max(0.0),
        _ => x.iter().map(|v| (1.0 - (v / r).powi(2)).max(0.0)).product(),
    }
}

/// A sum of three Gaussian bumps placed around the peak of `m₁` on the scale
/// of the region where `m > 0`, times a boundary cutoff. Amplitudes are
/// positive unless `signed`.
pub(crate) fn bump_field(g: &Grid, rng: &mut ChaCha8Rng, signed: bool) -> GridFunction {
    let d = g.dim();
    let center = peak(g);
    let r = positive_extent(g, &center);
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            let c: Vec<f64> = center
                .iter()
                .map(|x| {
                    let v = x + rng.random_range(-0.3..0.3) * r;
                    if g.geometry.mode == GeometryMode::RadialN {
                        v.abs()
                    } else {
                        v
                    }
                })
                .collect();
            let width = rng.random_range(0.1..0.5) * r;
            let amp = if signed {
                rng.random_range(-1.5..1.5)
            } else {
                rng.random_range(0.5..1.5)
            };
            (c, width, amp)
        })
        .collect();
    GridFunction::from_fn(g, |x| {
        let s: f64 = bumps
            .iter()
            .map(|(c, w, a)| {
                let d2: f64 = (0..d).map(|k| (x[k] - c[k]).powi(2)).sum();
                a * (-d2 / (w * w)).exp()
            })
            .sum();
        s * cutoff(g, x)
    })
}
