fn main() {
    let threads = std::env::var("QUANTCURVE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(quantcurve::cli::main_with_args(&args));
}
