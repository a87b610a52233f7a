//! Run every factorization method on one abnormal phantom and compare
//! reconstruction quality and iteration counts at rank 5.
//!
//!     cargo run --example factorization_zoo

use thermokit::factorize::{factorize, reconstruction_error, FactorizeConfig, Method};
use thermokit::pipeline::PhantomTemplate;
use thermokit::seqio::{build_heat_matrix, normalize_by_reference, PhantomLabel};

fn main() -> Result<(), thermokit::Error> {
    let spec = PhantomTemplate::default().member_spec(PhantomLabel::Abnormal, 3);
    let seq = thermokit::seqio::generate_phantom(&spec)?;
    let heat = build_heat_matrix(&normalize_by_reference(&seq))?;
    println!(
        "heat matrix: {} pixels x {} frames\n",
        heat.pixels(),
        heat.frames()
    );

    let cfg = FactorizeConfig::default();
    println!("{:<14} {:>12} {:>10}", "method", "rel. error", "iters");
    for method in Method::ALL {
        let result = factorize(method, &heat, &cfg)?;
        let err = reconstruction_error(&heat, &result)?;
        println!("{:<14} {:>12.6} {:>10}", method.name(), err, result.iterations_run);
    }
    Ok(())
}
