//! XOR with two hidden units: Levenberg-Marquardt against tier-search
//! training from the same Nguyen-Widrow starts.

use trusttech::mlp::{
    lm_train, nguyen_widrow_init, tt_train, xor_data, MlpArch, TtTrainConfig,
};
use trusttech::solvers::LmConfig;

fn main() -> trusttech::Result<()> {
    let data = xor_data();
    let arch = MlpArch::new(2, 2)?;
    let ranges = data.input_ranges();
    println!("seed        LM mse   tier-search mse  minima");
    for seed in 0..10 {
        let w0 = nguyen_widrow_init(&arch, &ranges, seed)?;
        let lm = lm_train(&arch, &w0, &data, &LmConfig::default())?;
        let tt = tt_train(&arch, &w0, &data, &TtTrainConfig::default())?;
        println!(
            "{seed:>4} {:>13.3e} {:>17.3e} {:>7}",
            lm.mse,
            tt.mse,
            tt.solutions.len()
        );
    }
    Ok(())
}
