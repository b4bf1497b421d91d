//! Train a small log-domain MLP on a synthetic three-class problem.
use lnsnet::lns::LnsFormat;
use lnsnet::nn::{ApproxConfig, NumericConfig, TrainConfig, Trainer};
use lnsnet::nn::Backend;
use lnsnet::EncodedSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let numeric = NumericConfig::lns(LnsFormat::LOG16, ApproxConfig::GENERAL_LUT);
    let config = TrainConfig { epochs: 15, learning_rate: 0.05, hidden: vec![12], numeric, ..TrainConfig::default() };
    let backend = config.numeric.lns_backend(config.beta)?;

    // points on three rays, with a little wobble
    let (mut inputs, mut labels) = (Vec::new(), Vec::new());
    for i in 0..300usize {
        let class = i % 3;
        let r = 0.2 + (i as f64 * 0.618).fract() * 0.8;
        let angle = class as f64 * 2.1 + ((i * 7) % 11) as f64 * 0.03;
        inputs.extend([r * angle.cos(), r * angle.sin(), 0.5].map(|v| backend.encode(v)));
        labels.push(class as u8);
    }
    let set = EncodedSet::new(inputs, labels, 3, 3)?;

    let mut trainer = Trainer::new(backend, config, 3, 3)?;
    let reports = trainer.fit(&set, None, |r| println!("epoch {:>2}: running accuracy {:.1}%", r.epoch, r.train_accuracy))?;
    println!("final accuracy {:.1}% after {} epochs", lnsnet::nn::evaluate(trainer.model(), &set)?, reports.len());
    Ok(())
}
