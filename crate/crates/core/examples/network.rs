//! Parameter counts of the default models and a finite-difference check of
//! the analytic gradient on a toy network.

use ndarray::Array3;
use neurorate::nn::{count_parameters, Architecture, Network};
use neurorate::topomap::TopoMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> neurorate::Result<()> {
    let arch = Architecture::default();
    let cnn = Network::cnn(arch.clone(), 0)?;
    let full = Network::full(arch, 0)?;
    println!("default cnn: {} parameters", count_parameters(&cnn));
    println!("default cnn-lstm: {} parameters", count_parameters(&full));
    for g in full.layout().groups() {
        println!("  {:<24} {:>9}", g.name, g.len());
    }

    let toy = Architecture::toy();
    let net = Network::full(toy.clone(), 7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<TopoMap> = (0..toy.sequence)
        .map(|w| TopoMap {
            data: Array3::from_shape_fn((toy.grid, toy.grid, toy.bands), |_| rng.random_range(-1.0..1.0)),
            trial_id: "toy".into(),
            window_start: w,
        })
        .collect();
    let p = net.params().to_vec();
    let mut grad = vec![0.0; p.len()];
    net.accumulate_gradient(&p, &xs, 0.5, None, 1.0, &mut grad)?;
    let loss = |q: &[f64]| (net.predict_with(q, &xs, None).unwrap() - 0.5).powi(2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in (0..p.len()).step_by(7) {
        let (mut a, mut b) = (p.clone(), p.clone());
        a[i] += h;
        b[i] -= h;
        let fd = (loss(&a) - loss(&b)) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8));
    }
    println!("toy network: {} parameters, worst relative gradient error {worst:.2e}", p.len());
    Ok(())
}
