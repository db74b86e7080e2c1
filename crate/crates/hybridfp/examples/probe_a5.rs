fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "configs/paper_example_p2.json".into());
    let cfg = hybridfp::config::load_config(std::path::Path::new(&arg)).unwrap();
    let (instance, params, settings) = cfg.instantiate().unwrap();
    let trace = hybridfp::iteration::run(&instance, &params, &settings).unwrap();
    let mut worst = (0usize, 0.0f64);
    for w in trace.records.windows(2) {
        let dip = w[0].phi_anchor - w[1].phi_anchor;
        if dip > worst.1 {
            worst = (w[1].n, dip);
        }
    }
    println!(
        "records {}, status {:?}, worst dip {:.3e} at n={}",
        trace.records.len(),
        trace.terminal_status,
        worst.1,
        worst.0
    );
    for r in trace.records.iter().filter(|r| r.n + 3 >= worst.0 && r.n <= worst.0 + 2) {
        println!(
            "n={} phi={:.12} cert_r={:.3e} step={:.3e}",
            r.n, r.phi_anchor, r.cert_retraction, r.step_norm
        );
    }
}
