//! Five-fold cross-validation on noisy two-moons data. Reads a labelled CSV
//! instead when a path is given.

use std::fs::File;

use trusttech::mlp::{kfold_eval, lm_trainer, tt_trainer, two_moons, LabeledData, MlpArch, TtTrainConfig};
use trusttech::solvers::LmConfig;

fn main() -> trusttech::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(path) => LabeledData::read_csv(File::open(path)?, true)?,
        None => two_moons(200, 0.2, 5),
    };
    for k in [2, 4] {
        let arch = MlpArch::new(data.features(), k)?;
        let lm = kfold_eval(&arch, &data, 5, &lm_trainer(LmConfig::default()), 1)?;
        let tt = kfold_eval(&arch, &data, 5, &tt_trainer(TtTrainConfig::default()), 1)?;
        println!(
            "{k} hidden: LM test mse {:.4} ({:.1}%), tier search {:.4} ({:.1}%)",
            lm.test_error, lm.accuracy, tt.test_error, tt.accuracy
        );
    }
    Ok(())
}
