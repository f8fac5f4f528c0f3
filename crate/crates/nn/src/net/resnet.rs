use rand::Rng;

use crate::graph::{Graph, Var};
use crate::layers::{BatchNorm2d, Conv2d, Mode};
use crate::param::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Result;

pub const BASE_WIDTHS: [usize; 4] = [64, 128, 256, 512];
pub const MIN_WIDTH: usize = 4;

/// Stage widths scaled by `mult`, never below [`MIN_WIDTH`].
pub fn stage_widths(mult: f64) -> [usize; 4] {
    BASE_WIDTHS.map(|w| ((w as f64 * mult).round() as usize).max(MIN_WIDTH))
}

#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub conv1: Conv2d,
    pub bn1: BatchNorm2d,
    pub conv2: Conv2d,
    pub bn2: BatchNorm2d,
    pub shortcut: Option<(Conv2d, BatchNorm2d)>,
}

impl BasicBlock {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let shortcut = if stride != 1 || cin != cout {
            Some((
                Conv2d::new(store, &format!("{name}.down"), cin, cout, 1, stride, 0, false, rng)?,
                BatchNorm2d::new(store, &format!("{name}.down_bn"), cout)?,
            ))
        } else {
            None
        };
        Ok(BasicBlock {
            conv1: Conv2d::new(store, &format!("{name}.conv1"), cin, cout, 3, stride, 1, false, rng)?,
            bn1: BatchNorm2d::new(store, &format!("{name}.bn1"), cout)?,
            conv2: Conv2d::new(store, &format!("{name}.conv2"), cout, cout, 3, 1, 1, false, rng)?,
            bn2: BatchNorm2d::new(store, &format!("{name}.bn2"), cout)?,
            shortcut,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &mut ParamStore<T>, x: Var, mode: Mode) -> Result<Var> {
        let y = self.conv1.forward(g, store, x)?;
        let y = self.bn1.forward(g, store, y, mode)?;
        let y = g.relu(y);
        let y = self.conv2.forward(g, store, y)?;
        let y = self.bn2.forward(g, store, y, mode)?;
        let skip = match &self.shortcut {
            Some((conv, bn)) => {
                let s = conv.forward(g, store, x)?;
                bn.forward(g, store, s, mode)?
            }
            None => x,
        };
        let y = g.add(y, skip)?;
        Ok(g.relu(y))
    }
}

#[derive(Debug, Clone)]
pub struct ResNet18 {
    pub stem: Conv2d,
    pub stem_bn: BatchNorm2d,
    pub stages: Vec<[BasicBlock; 2]>,
    pub widths: [usize; 4],
}

impl ResNet18 {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        in_channels: usize,
        mult: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let widths = stage_widths(mult);
        let stem = Conv2d::new(store, "stem.conv", in_channels, widths[0], 7, 2, 3, false, rng)?;
        let stem_bn = BatchNorm2d::new(store, "stem.bn", widths[0])?;
        let mut stages = Vec::with_capacity(4);
        let mut cin = widths[0];
        for (s, &w) in widths.iter().enumerate() {
            let stride = if s == 0 { 1 } else { 2 };
            stages.push([
                BasicBlock::new(store, &format!("layer{}.0", s + 1), cin, w, stride, rng)?,
                BasicBlock::new(store, &format!("layer{}.1", s + 1), w, w, 1, rng)?,
            ]);
            cin = w;
        }
        Ok(ResNet18 {
            stem,
            stem_bn,
            stages,
            widths,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.widths[3]
    }

    /// Runs the network; `trace` receives the output of the stem, the pool
    /// and every stage.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &mut ParamStore<T>,
        x: Var,
        mode: Mode,
        mut trace: Option<&mut Vec<Vec<usize>>>,
    ) -> Result<Var> {
        let mut record = |g: &Graph<T>, v: Var| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(g.shape(v).to_vec());
            }
        };
        let y = self.stem.forward(g, store, x)?;
        let y = self.stem_bn.forward(g, store, y, mode)?;
        let y = g.relu(y);
        record(g, y);
        let mut y = g.maxpool2d(y, 3, 2, 1)?;
        record(g, y);
        for stage in &self.stages {
            for block in stage {
                y = block.forward(g, store, y, mode)?;
            }
            record(g, y);
        }
        Ok(y)
    }
}
