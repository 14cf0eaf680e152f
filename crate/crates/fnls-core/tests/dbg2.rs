#[test]
fn dbg_cap() {
    use fnls_core::*;
    use fnls_core::spectral::max_resample_scale;
    let g = Grid::new(1, 1, 16.0, 256, 16).unwrap();
    let u = Field::gaussian(g.clone(), 1.0, 1.0);
    println!("gaussian w=1: cap={}", max_resample_scale(&u));
    let ub = Field::gaussian_y_broken(g.clone(), 0.5, 1.0, 0.1);
    println!("gaussian w=0.5 ybroken: cap={}", max_resample_scale(&ub));
    panic!("done");
}
