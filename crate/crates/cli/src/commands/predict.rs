//! `pushgp predict`: one-shot prediction at an action triple.

use crate::artifact;
use pushgp::pushmodel::PushInput;
use pushgp::Result;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct PredictOptions {
    pub model_file: PathBuf,
    pub speed: f64,
    pub contact: f64,
    pub angle: f64,
}

#[derive(Debug, Clone)]
pub struct PredictOutput {
    pub labels: [&'static str; 3],
    pub means: [f64; 3],
    pub stds: [f64; 3],
}

impl PredictOutput {
    pub fn render(&self) -> String {
        let mut s = String::from("output,mean,std\n");
        for i in 0..3 {
            s.push_str(&format!("{},{},{}\n", self.labels[i], self.means[i], self.stds[i]));
        }
        s
    }
}

pub fn cmd_predict(opts: &PredictOptions) -> Result<PredictOutput> {
    let input = PushInput::new(opts.speed, opts.contact, opts.angle);
    input.validate()?;
    let model = artifact::load(&opts.model_file)?;
    let g = model.predict(&input)?;
    Ok(PredictOutput {
        labels: ["dx_mm", "dy_mm", "dtheta_rad"],
        means: [g[0].mean, g[1].mean, g[2].mean],
        stds: [g[0].variance.sqrt(), g[1].variance.sqrt(), g[2].variance.sqrt()],
    })
}
