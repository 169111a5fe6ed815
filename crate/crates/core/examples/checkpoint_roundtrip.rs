//! Saves freshly initialized parameters, reloads them and confirms the
//! registry and every value survived.

use astsumm::model::{load_checkpoint, save_checkpoint, ModelParams, ModelVariant};
use astsumm::pipeline::Profile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = Profile::Desk.dims(300, 80);
    let params = ModelParams::build(dims, ModelVariant::CodeGnnGru, 7)?;
    let dir = std::env::temp_dir().join("astsumm-checkpoint-example");
    let path = dir.join("checkpoint.json");
    save_checkpoint(&path, &params)?;
    let back = load_checkpoint(&path)?;

    println!("{} tensors, {} parameters", params.names().count(), params.parameter_count());
    for name in params.names() {
        println!("  {name:<24} {:?}", params.get(name).map(|t| t.shape().to_vec()).unwrap_or_default());
    }
    println!("checksum before {:016x}", params.checksum());
    println!("checksum after  {:016x}", back.checksum());
    println!("identical: {}", back == params);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
