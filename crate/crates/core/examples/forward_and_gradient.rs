//! Evaluate the network and compare its gradient with central differences.
//!
//! cargo run --example forward_and_gradient

use label_noise_lab::data::{generate_dataset, SignalSpec};
use label_noise_lab::network::{
    clean_batch_loss, forward, full_batch_gradient, init_network, noisy_batch_loss, Branch,
};
use label_noise_lab::rng::rng_from_seed;

fn main() -> label_noise_lab::error::Result<()> {
    let mut rng = rng_from_seed(7);
    let spec = SignalSpec::axis_aligned(10, 1.5, 1.0)?;
    let ds = generate_dataset(&spec, 5, 7, &mut rng);
    let net = init_network(10, 3, 3, 0.5, &mut rng)?;

    for s in ds.samples() {
        let f = forward(&net, s.patch1().view(), s.patch2().view())?;
        println!("y = {:+}  f = {f:+.5}", s.label);
    }
    println!("clean loss {:.6}", clean_batch_loss(&net, &ds)?);

    let eps = [1.0, -1.0, 1.0, 1.0, -1.0];
    let grad = full_batch_gradient(&net, &ds, &eps)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for b in [Branch::Plus, Branch::Minus] {
        for k in 0..10 {
            for r in 0..3 {
                let mut up = net.clone();
                up.weights_mut(b)[[k, r]] += h;
                let mut down = net.clone();
                down.weights_mut(b)[[k, r]] -= h;
                let fd = (noisy_batch_loss(&up, &ds, &eps)? - noisy_batch_loss(&down, &ds, &eps)?) / (2.0 * h);
                worst = worst.max((fd - grad.branch(b)[[k, r]]).abs());
            }
        }
    }
    println!("|grad| = {:.6}, worst finite-difference gap {worst:.2e}", grad.norm());
    Ok(())
}
