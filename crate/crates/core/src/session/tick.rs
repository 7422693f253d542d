use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::pattern::{eval, Frame};
use crate::scene::ClipPose;

use super::state::{Playback, SessionState};

pub const DEFAULT_TICK_HZ: u32 = 30;

/// What one tick shows: the simulated vehicle's clip pose (none while idle)
/// and the LED frame shared by the physical and simulated displays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickOutput {
    pub vehicle: Option<ClipPose>,
    pub frame: Frame,
    /// True during the hold at the start of each loop.
    pub in_loop_delay: bool,
}

/// One loop of a clip is `loop_delay_ms` of blackout with the vehicle held
/// at its first waypoint, then `duration_ms` of motion with the assigned
/// pattern evaluated from phase 0. Pure in `(catalog, state, now_ms)`.
pub fn frame_tick(catalog: &Catalog, state: &SessionState, now_ms: u64) -> TickOutput {
    let idle = TickOutput {
        vehicle: None,
        frame: Frame::black(),
        in_loop_delay: false,
    };
    let Playback::Playing {
        field_id,
        clip_id,
        epoch_ms,
    } = &state.playback
    else {
        return idle;
    };
    let Some(clip) = state.environment(catalog).clip(clip_id) else {
        return idle;
    };
    let cycle = clip.cycle_ms().max(1) as i128;
    let phase = (now_ms as i128 - *epoch_ms as i128).rem_euclid(cycle) as u64;
    if phase < clip.loop_delay_ms {
        return TickOutput {
            vehicle: Some(clip.start()),
            frame: Frame::black(),
            in_loop_delay: true,
        };
    }
    let local = phase - clip.loop_delay_ms;
    let frame = match state.effective_bindings(catalog, field_id) {
        Some((program, bindings)) => eval(program, local, &bindings, state.brightness)
            .unwrap_or_else(|e| {
                log::warn!("field {field_id}: {e}");
                Frame::black()
            }),
        None => Frame::black(),
    };
    TickOutput {
        vehicle: Some(clip.pose_at(local)),
        frame,
        in_loop_delay: false,
    }
}

/// Time of tick `k` at `hz`, in whole milliseconds.
pub fn tick_time_ms(k: u64, hz: u32) -> u64 {
    (k as u128 * 1000 / hz.max(1) as u128) as u64
}
