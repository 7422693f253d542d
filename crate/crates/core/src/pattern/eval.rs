use thiserror::Error;

use super::{Bindings, ColorRef, Frame, PatternProgram, Primitive, Rgb, SweepFrom, PIXELS};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown binding {0}")]
    UnknownBinding(String),
}

type Linear = [f64; 3];

fn scaled(rgb: Rgb, k: f64) -> Linear {
    [rgb.r as f64 * k, rgb.g as f64 * k, rgb.b as f64 * k]
}

fn quantize(v: f64) -> u8 {
    // f64::round rounds half away from zero
    v.round().clamp(0.0, 255.0) as u8
}

/// Evaluates `program` at `t_ms`.
///
/// Layers overwrite the pixels they light, bottom to top; unlit pixels are
/// black. `bindings` override param defaults. `brightness` is clamped to
/// `[0, 1]` and applied last, followed by rounding half away from zero.
pub fn eval(
    program: &PatternProgram,
    t_ms: u64,
    bindings: &Bindings,
    brightness: f64,
) -> Result<Frame, EvalError> {
    if let Some(name) = bindings.keys().find(|k| program.param(k).is_none()) {
        return Err(EvalError::UnknownBinding(name.clone()));
    }
    let resolve = |c: &ColorRef| match c {
        ColorRef::Literal(rgb) => *rgb,
        ColorRef::Param(name) => bindings
            .get(name)
            .copied()
            .or_else(|| program.param(name).map(|p| p.default))
            .unwrap_or(Rgb::BLACK),
    };
    let phase = t_ms % program.duration_ms.max(1);
    let mut canvas: [Option<Linear>; PIXELS] = [None; PIXELS];

    for layer in &program.layers {
        match layer {
            Primitive::Off => {}
            Primitive::Solid { color } => canvas.fill(Some(scaled(resolve(color), 1.0))),
            Primitive::Blink {
                color,
                period_ms,
                duty,
            } => {
                let local = (phase % period_ms) as f64;
                if local < duty * *period_ms as f64 {
                    canvas.fill(Some(scaled(resolve(color), 1.0)));
                }
            }
            Primitive::Pulse {
                color,
                period_ms,
                min,
                max,
            } => {
                let u = (phase % period_ms) as f64 / *period_ms as f64;
                let triangle = 1.0 - (2.0 * u - 1.0).abs();
                let level = min + (max - min) * triangle;
                canvas.fill(Some(scaled(resolve(color), level)));
            }
            Primitive::Sweep {
                color,
                from,
                width_px,
                period_ms,
            } => {
                let local = (phase % period_ms) as u128;
                let start = (PIXELS as u128 * local / *period_ms as u128) as usize;
                let lit = Some(scaled(resolve(color), 1.0));
                for step in start..(start + *width_px as usize).min(PIXELS) {
                    let idx = match from {
                        SweepFrom::Left => step,
                        SweepFrom::Right => PIXELS - 1 - step,
                    };
                    canvas[idx] = lit;
                }
            }
            Primitive::Segment { lo, hi, color } => {
                let lit = Some(scaled(resolve(color), 1.0));
                for px in &mut canvas[*lo as usize..=*hi as usize] {
                    *px = lit;
                }
            }
        }
    }

    let b = if brightness.is_nan() {
        0.0
    } else {
        brightness.clamp(0.0, 1.0)
    };
    let mut pixels = [Rgb::BLACK; PIXELS];
    for (out, px) in pixels.iter_mut().zip(canvas) {
        if let Some([r, g, bl]) = px {
            *out = Rgb::new(quantize(r * b), quantize(g * b), quantize(bl * b));
        }
    }
    Ok(Frame::from_pixels(pixels))
}
