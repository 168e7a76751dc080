use entprobe::linker::hinge_objective;
use entprobe::probe::{huber_objective, softmax_objective};
use ndarray::{Array1, Array2};
use rand::Rng;

const H: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

fn central(f: impl Fn(&[f64]) -> f64, at: &[f64]) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|i| {
            p[i] = at[i] + H;
            let up = f(&p);
            p[i] = at[i] - H;
            let down = f(&p);
            p[i] = at[i];
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn random_matrix(rng: &mut impl Rng, n: usize, f: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, f), |_| rng.random_range(-2.0..2.0))
}

#[test]
fn cross_entropy_gradient() {
    let mut rng = entprobe::rng::stream(1, "grad/ce");
    for case in 0..100 {
        let n = rng.random_range(2..12);
        let f = rng.random_range(1..=10);
        let k = rng.random_range(2..=4);
        let x = random_matrix(&mut rng, n, f);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let l2 = rng.random_range(0.0..0.5);
        let params: Vec<f64> = (0..k * f + k)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let split = |p: &[f64]| {
            let w = Array2::from_shape_vec((k, f), p[..k * f].to_vec()).unwrap();
            let b = Array1::from(p[k * f..].to_vec());
            (w, b)
        };
        let (w, b) = split(&params);
        let (_, gw, gb) = softmax_objective(x.view(), &y, w.view(), b.view(), l2);
        let analytic: Vec<f64> = gw.iter().chain(gb.iter()).copied().collect();
        let numeric = central(
            |p| {
                let (w, b) = split(p);
                softmax_objective(x.view(), &y, w.view(), b.view(), l2).0
            },
            &params,
        );
        let e = rel_err(&analytic, &numeric);
        assert!(e < TOL, "case {case}: relative error {e}");
    }
}

#[test]
fn huber_gradient() {
    let mut rng = entprobe::rng::stream(2, "grad/huber");
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..12);
        let f = rng.random_range(1..=10);
        let x = random_matrix(&mut rng, n, f);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let delta = rng.random_range(0.2..2.0);
        let l2 = rng.random_range(0.0..0.5);
        let params: Vec<f64> = (0..=f).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Array1::from(params[..f].to_vec());
        let b = params[f];
        // skip points within finite-difference reach of the |r| = δ kink
        let pred = x.dot(&w) + b;
        if pred
            .iter()
            .zip(&y)
            .any(|(p, t)| ((p - t).abs() - delta).abs() < 1e-4)
        {
            continue;
        }
        let (_, gw, gb) = huber_objective(x.view(), &y, w.view(), b, l2, delta);
        let mut analytic = gw.to_vec();
        analytic.push(gb);
        let numeric = central(
            |p| {
                huber_objective(
                    x.view(),
                    &y,
                    Array1::from(p[..f].to_vec()).view(),
                    p[f],
                    l2,
                    delta,
                )
                .0
            },
            &params,
        );
        let e = rel_err(&analytic, &numeric);
        assert!(e < TOL, "case {checked}: relative error {e}");
        checked += 1;
    }
}

#[test]
fn hinge_subgradient() {
    let mut rng = entprobe::rng::stream(3, "grad/hinge");
    let margin = 1.0;
    let mut checked = 0;
    while checked < 100 {
        let f = 5;
        let n = rng.random_range(1..8);
        let data: Vec<(Vec<Vec<f64>>, usize)> = (0..n)
            .map(|_| {
                let c = rng.random_range(2..6);
                let feats = (0..c)
                    .map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                (feats, rng.random_range(0..c))
            })
            .collect();
        let w: Vec<f64> = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
        // differentiable only away from hinge corners and rival ties
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let smooth = data.iter().all(|(feats, g)| {
            let mut rivals: Vec<f64> = (0..feats.len())
                .filter(|i| i != g)
                .map(|i| dot(&w, &feats[i]))
                .collect();
            rivals.sort_by(|a, b| b.total_cmp(a));
            let gap = rivals.get(1).map_or(f64::INFINITY, |s| rivals[0] - s);
            (margin - dot(&w, &feats[*g]) + rivals[0]).abs() > 1e-3 && gap > 1e-3
        });
        if !smooth {
            continue;
        }
        let (_, analytic) = hinge_objective(&w, &data, margin);
        let numeric = central(|p| hinge_objective(p, &data, margin).0, &w);
        let e = rel_err(&analytic, &numeric);
        assert!(e < TOL, "case {checked}: relative error {e}");
        checked += 1;
    }
}
