mod common;

use std::sync::Arc;

use common::random_values;
use peri_spectra::energy::{fractional_energy, nonlocal_energy, nonlocal_energy_gradient};
use peri_spectra::mesh::build_mesh;
use peri_spectra::{DiscreteFunction, DomainSpec, Horizon, KernelParams, NonlocalForm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central differences of `f` in every interior coordinate.
fn finite_differences(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = 1e-6 * x[i].abs().max(1e-2);
            y[i] = x[i] + step;
            let up = f(&y);
            y[i] = x[i] - step;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm
}

struct Instance {
    n: usize,
    a: f64,
    b: f64,
    delta: Horizon,
    values: Vec<f64>,
}

fn instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(4..=14);
            let a = rng.gen_range(-1.0..0.0);
            let b = a + rng.gen_range(0.5..2.0);
            let h = (b - a) / n as f64;
            let delta = if i % 4 == 3 {
                Horizon::Infinite
            } else {
                Horizon::Finite(rng.gen_range(1..=n + 1) as f64 * h)
            };
            Instance {
                n,
                a,
                b,
                delta,
                values: random_values(&mut rng, n),
            }
        })
        .collect()
}

#[test]
fn public_gradient_matches_differences() {
    for p in [1.5, 2.0, 3.0] {
        for (case, inst) in instances(17, 10).into_iter().enumerate() {
            let Horizon::Finite(_) = inst.delta else {
                continue;
            };
            let mesh = Arc::new(
                build_mesh(
                    &DomainSpec::new(inst.a, inst.b, inst.delta).unwrap(),
                    inst.n,
                )
                .unwrap(),
            );
            let params = KernelParams::new(0.4, p, mesh.delta_effective).unwrap();
            let interior = &inst.values[1..inst.n];
            let u = DiscreteFunction::from_interior(mesh.clone(), interior).unwrap();
            let full = nonlocal_energy_gradient(&u, &params).unwrap();
            let off = mesh.omega_offset();
            assert!(full[..off]
                .iter()
                .chain(&full[off + inst.n + 1..])
                .all(|&g| g == 0.0));
            let analytic = &full[off + 1..off + inst.n];
            let fd = finite_differences(interior, |x| {
                let v = DiscreteFunction::from_interior(mesh.clone(), x).unwrap();
                nonlocal_energy(&v, &params).unwrap().total
            });
            let gap = relative_gap(analytic, &fd);
            assert!(gap <= 1e-5, "p={p} case {case}: relative gap {gap:e}");
        }
    }
}

#[test]
fn form_gradient_matches_differences() {
    for p in [1.5, 2.0, 3.0] {
        for (case, inst) in instances(29, 10).into_iter().enumerate() {
            let h = (inst.b - inst.a) / inst.n as f64;
            let params = KernelParams::new(0.6, p, inst.delta).unwrap();
            let form = NonlocalForm::new(inst.n, h, params).unwrap();
            let (_, g) = form.energy_gradient(&inst.values).unwrap();
            let energy = |x: &[f64]| {
                let mut v = vec![0.0];
                v.extend_from_slice(x);
                v.push(0.0);
                form.energy(&v).unwrap()
            };
            let interior = &inst.values[1..inst.n];
            let fd = finite_differences(interior, energy);
            let gap = relative_gap(&g[1..inst.n], &fd);
            assert!(
                gap <= 1e-5,
                "p={p} case {case} delta={}: relative gap {gap:e}",
                inst.delta
            );

            let mass = |x: &[f64]| {
                let mut v = vec![0.0];
                v.extend_from_slice(x);
                v.push(0.0);
                form.mass(&v)
            };
            let (_, gm) = form.mass_gradient(&inst.values);
            let gap = relative_gap(&gm[1..inst.n], &finite_differences(interior, mass));
            assert!(gap <= 1e-5, "p={p} case {case}: mass gradient gap {gap:e}");
        }
    }
}

#[test]
fn fractional_energy_ignores_the_mesh_collar() {
    // the same (a, b) data on meshes built for different horizons
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let interior: Vec<f64> = (0..11).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let params = KernelParams::new(0.5, 2.5, Horizon::Infinite).unwrap();
    let values: Vec<f64> = [0.25, 1.0, 3.0]
        .into_iter()
        .map(|d| {
            let mesh = Arc::new(
                build_mesh(&DomainSpec::new(0.0, 1.0, Horizon::Finite(d)).unwrap(), 12).unwrap(),
            );
            fractional_energy(
                &DiscreteFunction::from_interior(mesh, &interior).unwrap(),
                &params,
            )
            .unwrap()
        })
        .collect();
    assert!(values.windows(2).all(|w| w[0] == w[1]), "{values:?}");
}
