use cliffbif::acceptance::{Suite, SuiteConfig};

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get().min(4));
    let mut suite = Suite::new(SuiteConfig {
        threads,
        out_dir: Some(dir.path().to_path_buf()),
        ..SuiteConfig::default()
    });
    let mut failed = 0;
    for id in cliffbif::acceptance::CRITERIA {
        let report = suite.run(id);
        println!("{report}");
        failed += usize::from(!report.passed);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        cliffbif::acceptance::CRITERIA.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
