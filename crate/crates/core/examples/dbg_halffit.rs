use pws_core::spline::*;
// Side fit with the grid shrunk to the side's own region.
fn side_fit(delta: f64, h: f64, y_lo: f64) {
    let gx = KnotGrid1D::new(-3.0, 3.0, delta).unwrap();
    let gy = KnotGrid1D::new(y_lo, 3.0, delta).unwrap();
    let grid = KnotGrid2D::new(gx, gy);
    let curve = |x: f64| 0.7 * (1.2 * x).sin();
    let n = (6.0 / h).round() as usize + 1;
    let mut sites = Vec::new();
    for j in 0..n { for i in 0..n {
        let p = [-3.0 + h * i as f64, -3.0 + h * j as f64];
        if p[1] - curve(p[0]) > h && p[1] >= y_lo { sites.push(p); }
    }}
    let vals: Vec<f64> = sites.iter().map(|p| (p[0]*0.8).sin() * (p[1]*0.7).cos() + 4.0).collect();
    let s = SampleSet::new_2d(sites, vals, Some(h)).unwrap();
    match fit_spline_2d(&s, &grid) {
        Ok(f) => {
            // sup error on the measured region (2h band excluded)
            let mut sup = 0.0f64;
            let d = h / 4.0;
            let nn = (6.0 / d).round() as usize + 1;
            for j in 0..nn { for i in 0..nn {
                let p = [-3.0 + d * i as f64, -3.0 + d * j as f64];
                if p[1] - curve(p[0]) > 2.0 * h && p[1] >= y_lo {
                    let t = (p[0]*0.8).sin() * (p[1]*0.7).cos() + 4.0;
                    sup = sup.max((f.spline.eval(p).unwrap() - t).abs());
                }
            }}
            println!("delta={delta} h={h} ylo={y_lo}: rel={:.3e}  sup_err={:.3e} ({} pts, {} coeffs)", f.rel_sigma_min, sup, s.len(), grid.coeff_count());
        }
        Err(e) => println!("delta={delta} h={h} ylo={y_lo}: ERR {e}"),
    }
}
fn main() {
    side_fit(1.0, 0.25, -1.0);
    side_fit(0.5, 0.125, -1.0);
    side_fit(0.25, 0.0625, -1.0);
}
