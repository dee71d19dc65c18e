//! Writes an activation dump and a token label file, reads them back and
//! slices layers and neurons out of the result.

use redunkit::activation::NeuronId;
use redunkit::labels::{load_labels, TaskKind};
use redunkit::nact::{load_activations, save_activations};
use redunkit::synth::PlantedTask;

fn main() -> redunkit::Result<()> {
    let (acts, data) = PlantedTask {
        tokens: 40,
        layers: 3,
        layer_size: 4,
        ..Default::default()
    }
    .generate()?;
    let dir = std::env::temp_dir();
    let nact = dir.join("example.nact");
    let tsv = dir.join("example.tsv");
    save_activations(&acts, &nact)?;
    let mut text = String::new();
    for (i, &y) in data.labels().iter().enumerate() {
        text.push_str(&format!("word{i}\t{}\n", data.label_names()[y]));
        if i % 8 == 7 {
            text.push('\n');
        }
    }
    std::fs::write(&tsv, text)?;

    let back = load_activations(&nact)?;
    let labels = load_labels(&tsv, TaskKind::TokenLabeling)?;
    println!(
        "{}: T={} L={} H={}",
        back.model_name(),
        back.num_tokens(),
        back.num_layers(),
        back.layer_size()
    );
    println!("identical after round trip: {}", back == acts);
    println!(
        "{} labels, classes {:?}",
        labels.rows(),
        labels.label_names()
    );

    let prefix = back.concat_layers(1)?;
    println!("layers 0..=1 give {} features", prefix.num_features());
    let id = NeuronId::from_parts(2, 3, back.layer_size());
    println!(
        "neuron {} is layer {} offset {}",
        id.0,
        id.layer(back.layer_size()),
        id.offset(back.layer_size())
    );
    println!("token 5 of that neuron: {}", back.value(2, 5, 3));
    Ok(())
}
