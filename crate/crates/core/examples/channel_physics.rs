// Closed-form channel building blocks: free-space loss, Fresnel
// coefficients and the Brewster angle.

use std::f64::consts::PI;

use raydio::channel::{amplitude_db, free_space_amplitude, fresnel_reflection};
use raydio::geometry::Material;

pub struct Figures {
    pub fspl_1m_db: f64,
    pub normal_incidence: f64,
    pub brewster_par: f64,
}

pub fn run_example() -> raydio::Result<Figures> {
    let f = 2.4e9;
    let fspl_1m_db = -amplitude_db(free_space_amplitude(1.0, f)?);
    println!("free-space loss at 1 m, 2.4 GHz: {fspl_1m_db:.2} dB");

    let glass = Material::new("lossless", 4.0, 0.0, [200, 200, 255]);
    let (perp, par) = fresnel_reflection(0.0, &glass, f)?;
    println!("normal incidence on εr=4: |r⊥| = {:.4}, |r∥| = {:.4}", perp.norm(), par.norm());

    let brewster = glass.relative_permittivity.sqrt().atan();
    let (_, par_b) = fresnel_reflection(brewster, &glass, f)?;
    println!("Brewster angle {:.2} deg: |r∥| = {:.1e}", brewster * 180.0 / PI, par_b.norm());

    let concrete = Material::new("concrete", 5.31, 0.0326 * 2.4f64.powf(0.8095), [180, 180, 180]);
    for deg in [0.0, 30.0, 60.0, 85.0] {
        let (p, q) = fresnel_reflection(deg * PI / 180.0, &concrete, f)?;
        println!("concrete {deg:4.0} deg  |r⊥| {:.3}  |r∥| {:.3}", p.norm(), q.norm());
    }
    Ok(Figures {
        fspl_1m_db,
        normal_incidence: perp.norm(),
        brewster_par: par_b.norm(),
    })
}

#[allow(dead_code)]
fn main() {
    run_example().expect("channel example failed");
}
