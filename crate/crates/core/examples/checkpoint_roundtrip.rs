//! Save a model checkpoint, load it back and check the weights survive.
use lnsnet::lns::LnsFormat;
use lnsnet::nn::{AnyModel, ApproxConfig, Checkpoint, MlpModel, NumericConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let numeric = NumericConfig::lns(LnsFormat::LOG12, ApproxConfig::BitShift);
    let backend = numeric.lns_backend(-7.0)?;
    let model = MlpModel::new(backend, &[784, 100, 10], 7)?;
    let before = model.decoded_parameters();

    let path = std::env::temp_dir().join("lnsnet-example.ckpt");
    Checkpoint::new(numeric, model).save(&path)?;
    let loaded = Checkpoint::load(&path)?;
    let size = std::fs::metadata(&path)?.len();
    let AnyModel::Lns(m) = &loaded.model else {
        return Err("expected a log-domain model".into());
    };
    println!("{} parameters, {size} bytes, sizes {:?}", before.len(), m.sizes());
    println!("identical after reload: {}", m.decoded_parameters() == before);
    Ok(())
}
