//! Write a tiny IDX dataset, read it back, split it and encode it for each
//! backend. Pass a data directory to inspect a real dataset instead.
use lnsnet::dataset::{self, Dataset, IMAGE_DIM};
use lnsnet::harness::{load_split, DatasetName, Split};
use lnsnet::lns::LnsFormat;
use lnsnet::nn::{ApproxConfig, Backend, FloatBackend, NumericConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = match std::env::args().nth(1) {
        Some(dir) => load_split(dir.as_ref(), DatasetName::Mnist, Split::Test)?,
        None => {
            let dir = std::env::temp_dir().join("lnsnet-example");
            std::fs::create_dir_all(&dir)?;
            let images = (0..20 * IMAGE_DIM).map(|i| (i * 13 % 256) as u8).collect();
            let labels = (0..20).map(|i| i % 10).collect();
            let (ip, lp) = (dir.join("images.gz"), dir.join("labels"));
            dataset::write_idx(&Dataset::new(images, labels, 10)?, &ip, &lp)?;
            dataset::load_idx(&ip, &lp)?
        }
    };
    let (train, val) = dataset::split_validation(&ds, 5, 1)?;
    println!("{} samples, {} classes -> {} train / {} validation", ds.len(), ds.n_classes(), train.len(), val.len());

    let lns = NumericConfig::lns(LnsFormat::LOG16, ApproxConfig::GENERAL_LUT).lns_backend(-7.0)?;
    let exact = dataset::convert(&val, &lns);
    let approx = dataset::convert_approx(&val, &lns);
    let float = dataset::convert(&val, &FloatBackend::default());
    let brightest = (0..IMAGE_DIM).max_by_key(|&k| val.image(0)[k]).unwrap_or(0);
    println!(
        "pixel {} of sample 0: float {:.5}, lns exact {:.5}, lns log-only {:.5}",
        val.image(0)[brightest],
        float.input(0)[brightest],
        lns.decode(exact.input(0)[brightest]),
        lns.decode(approx.input(0)[brightest]),
    );
    Ok(())
}
