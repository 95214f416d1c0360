//! Analytic multiply-accumulate and parameter counting.
//!
//! Layout: a 3x3 stride-2 stem, one MBConv stack per block, a 1x1 head
//! convolution and a fully connected classifier. Each MBConv layer is
//!
//! * 1x1 expansion to `in * e` channels (omitted when `e == 1`),
//! * depthwise `k x k` convolution carrying the stage stride on the first layer,
//! * optional squeeze-excitation: two fully connected layers with bias,
//!   reduced width `max(1, floor(in / 4))`,
//! * 1x1 projection to the stage's output channels.
//!
//! Convolutions have no bias and are followed by batch norm (two parameters
//! per output channel). MACs cover convolutions and fully connected layers;
//! pooling, activations and residual adds are not counted. Spatial sizes use
//! "same" padding, so a stride `s` maps `h` to `ceil(h / s)`.

use super::{Architecture, SpaceDef, SpaceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CostSummary {
    /// Multiply-accumulate operations for one image.
    pub flops: u64,
    pub params: u64,
}

impl std::ops::AddAssign for CostSummary {
    fn add_assign(&mut self, rhs: Self) {
        self.flops += rhs.flops;
        self.params += rhs.params;
    }
}

fn conv(cin: u64, cout: u64, k: u64, groups: u64, out_hw: u64) -> CostSummary {
    let weights = k * k * (cin / groups) * cout;
    CostSummary {
        flops: weights * out_hw * out_hw,
        params: weights + 2 * cout,
    }
}

fn fc(cin: u64, cout: u64) -> CostSummary {
    CostSummary {
        flops: cin * cout,
        params: cin * cout + cout,
    }
}

fn mbconv(
    cin: u64,
    cout: u64,
    expansion: u64,
    kernel: u64,
    stride: u64,
    se: bool,
    hw: u64,
) -> (CostSummary, u64) {
    let hidden = cin * expansion;
    let out_hw = hw.div_ceil(stride);
    let mut c = CostSummary::default();
    if expansion != 1 {
        c += conv(cin, hidden, 1, 1, hw);
    }
    c += conv(hidden, hidden, kernel, hidden, out_hw);
    if se {
        let reduced = (cin / 4).max(1);
        c += fc(hidden, reduced);
        c += fc(reduced, hidden);
    }
    c += conv(hidden, cout, 1, 1, out_hw);
    (c, out_hw)
}

/// MACs and parameters of `arch` at a square input of side `input_res`.
/// Parameters do not depend on the resolution.
pub fn flops_params(
    space: &SpaceDef,
    arch: &Architecture,
    input_res: u32,
) -> Result<CostSummary, SpaceError> {
    space.check(arch)?;
    if input_res == 0 {
        return Err(SpaceError::InvalidSpace(
            "input resolution must be positive".into(),
        ));
    }
    let mut hw = u64::from(input_res).div_ceil(2);
    let mut total = conv(3, space.stem_channels, 3, 1, hw);
    for (stage, block) in space.stages.iter().zip(&arch.blocks) {
        let mut cin = stage.in_channels;
        for layer in 0..block.layers {
            let stride = if layer == 0 { stage.stride } else { 1 };
            let (c, out_hw) = mbconv(
                cin,
                stage.out_channels,
                u64::from(block.expansion),
                u64::from(block.kernel),
                stride,
                block.se,
                hw,
            );
            total += c;
            hw = out_hw;
            cin = stage.out_channels;
        }
    }
    let last = space
        .stages
        .last()
        .map_or(space.stem_channels, |s| s.out_channels);
    total += conv(last, space.head_channels, 1, 1, hw);
    total += fc(space.head_channels, space.num_classes);
    Ok(total)
}
