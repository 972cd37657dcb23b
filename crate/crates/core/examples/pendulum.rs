use qdelay::design::design;
use qdelay::metrics::verify_bounds;
use qdelay::sim::{simulate, InitialFunction, SimOptions};
use qdelay::systems::{make_pendulum, tau_max};

fn main() -> qdelay::Result<()> {
    let p = make_pendulum(0.1)?;
    let tau = 0.9 * tau_max(&p)?;
    let d = design(&p, tau, 1.0, 0.3)?;
    println!(
        "tau = {tau:.4e}, u0 = {:.3}, j = {}, mu = {:.3e}",
        d.u0_r, d.j_min, d.mu
    );
    let phi = InitialFunction::constant(&[1.0, 0.0]);
    let tr = simulate(&p, &d.quantizer, &phi, tau, 10.0, &SimOptions::default())?;
    let r = verify_bounds(&tr, &d, &p, 10)?;
    println!(
        "entry time {:?}, sup |x| {:.4}, max U {:?}, {} switches, final state {:?}",
        r.entry_time,
        r.sup_norm,
        r.u_max,
        r.switch_count,
        tr.final_state().as_slice()
    );
    Ok(())
}
