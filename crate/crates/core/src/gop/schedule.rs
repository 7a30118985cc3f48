//! Frame-type and reference assignment inside a group of pictures.
//!
//! Anchors (I and P frames) are coded first in display order; B frames
//! follow by hierarchy level, ties broken by display index. B frames are
//! placed by binary midpoint splitting between consecutive anchors and
//! reference the two ends of the interval they split.

use std::fmt::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GopMode {
    AllIntra,
    LowDelayP,
    LowDelayB,
    RandomAccess,
}

impl GopMode {
    pub const ALL: [GopMode; 4] = [GopMode::AllIntra, GopMode::LowDelayP, GopMode::LowDelayB, GopMode::RandomAccess];

    pub fn code(self) -> u8 {
        match self {
            GopMode::AllIntra => 0,
            GopMode::LowDelayP => 1,
            GopMode::LowDelayB => 2,
            GopMode::RandomAccess => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.code() == code)
            .ok_or_else(|| Error::Format(format!("unknown GoP mode code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            GopMode::AllIntra => "AI",
            GopMode::LowDelayP => "LDP",
            GopMode::LowDelayB => "LDB",
            GopMode::RandomAccess => "RA",
        }
    }
}

impl fmt::Display for GopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GopMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown GoP mode {s:?} (expected AI, LDP, LDB or RA)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    I,
    P,
    B,
}

impl FrameType {
    pub fn code(self) -> u8 {
        match self {
            FrameType::I => 0,
            FrameType::P => 1,
            FrameType::B => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(FrameType::I),
            1 => Ok(FrameType::P),
            2 => Ok(FrameType::B),
            _ => Err(Error::Format(format!("unknown frame type code {code}"))),
        }
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameType::I => "I",
            FrameType::P => "P",
            FrameType::B => "B",
        })
    }
}

pub const DEFAULT_GOP_SIZE: usize = 32;
pub const DEFAULT_P_COUNT: usize = 6;
pub const DEFAULT_I_COUNT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GopConfig {
    pub mode: GopMode,
    pub gop_size: usize,
    /// P anchors per GoP in low-delay B mode.
    pub p_count: usize,
    /// I anchors per GoP in random-access mode.
    pub i_count: usize,
}

impl GopConfig {
    pub fn new(mode: GopMode) -> Self {
        Self {
            mode,
            gop_size: DEFAULT_GOP_SIZE,
            p_count: DEFAULT_P_COUNT,
            i_count: DEFAULT_I_COUNT,
        }
    }

    pub fn with_size(mut self, gop_size: usize) -> Self {
        self.gop_size = gop_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gop_size;
        if n == 0 || n > u16::MAX as usize {
            return Err(Error::InvalidGop(format!("gop size {n} outside [1, 65535]")));
        }
        if self.p_count > u8::MAX as usize || self.i_count > u8::MAX as usize {
            return Err(Error::InvalidGop("anchor counts must fit in one byte".into()));
        }
        match self.mode {
            GopMode::LowDelayB if self.p_count == 0 || self.p_count >= n => Err(Error::InvalidGop(format!(
                "LDB needs 1 <= p_count < gop_size, got p_count {} with gop_size {n}",
                self.p_count
            ))),
            GopMode::RandomAccess if self.i_count > n || self.i_count < 2.min(n) => Err(Error::InvalidGop(format!(
                "RA needs min(2, gop_size) <= i_count <= gop_size, got i_count {} with gop_size {n}",
                self.i_count
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub display_index: usize,
    pub coding_order: usize,
    pub frame_type: FrameType,
    pub past_ref: Option<usize>,
    pub future_ref: Option<usize>,
}

/// Entries in coding order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GopSchedule {
    entries: Vec<ScheduleEntry>,
}

/// `round(num / den)` with halves rounded up.
fn div_round(num: usize, den: usize) -> usize {
    (2 * num + den) / (2 * den)
}

fn fill_b(a: usize, b: usize, level: usize, out: &mut Vec<(usize, usize, usize, usize)>) {
    if b - a < 2 {
        return;
    }
    let m = (a + b) / 2;
    out.push((level, m, a, b));
    fill_b(a, m, level + 1, out);
    fill_b(m, b, level + 1, out);
}

/// Schedule of one GoP of `n` frames starting at display index `offset`,
/// with anchor counts clamped to what `n` frames can hold.
fn build(mode: GopMode, n: usize, p_count: usize, i_count: usize, offset: usize, first_order: usize) -> Vec<ScheduleEntry> {
    let mut anchors: Vec<ScheduleEntry> = Vec::new();
    let anchor = |d: usize, t: FrameType, past: Option<usize>| ScheduleEntry {
        display_index: d,
        coding_order: 0,
        frame_type: t,
        past_ref: past,
        future_ref: None,
    };
    match mode {
        GopMode::AllIntra => anchors.extend((0..n).map(|d| anchor(d, FrameType::I, None))),
        GopMode::LowDelayP => {
            anchors.push(anchor(0, FrameType::I, None));
            anchors.extend((1..n).map(|d| anchor(d, FrameType::P, Some(d - 1))));
        }
        GopMode::LowDelayB => {
            let p = p_count.min(n - 1);
            anchors.push(anchor(0, FrameType::I, None));
            for j in 1..=p {
                let d = div_round(j * (n - 1), p);
                let prev = anchors.last().unwrap().display_index;
                anchors.push(anchor(d, FrameType::P, Some(prev)));
            }
        }
        GopMode::RandomAccess => {
            let i = i_count.min(n).max(2.min(n));
            if i == 1 {
                anchors.push(anchor(0, FrameType::I, None));
            } else {
                anchors.extend((0..i).map(|j| anchor(div_round(j * (n - 1), i - 1), FrameType::I, None)));
            }
        }
    }
    let mut bs = Vec::new();
    for w in anchors.windows(2) {
        fill_b(w[0].display_index, w[1].display_index, 0, &mut bs);
    }
    bs.sort();
    let mut entries = anchors;
    entries.extend(bs.into_iter().map(|(_, m, a, b)| ScheduleEntry {
        display_index: m,
        coding_order: 0,
        frame_type: FrameType::B,
        past_ref: Some(a),
        future_ref: Some(b),
    }));
    for (k, e) in entries.iter_mut().enumerate() {
        e.coding_order = first_order + k;
        e.display_index += offset;
        e.past_ref = e.past_ref.map(|r| r + offset);
        e.future_ref = e.future_ref.map(|r| r + offset);
    }
    entries
}

/// Schedule of a single full GoP.
pub fn schedule(cfg: &GopConfig) -> Result<GopSchedule> {
    cfg.validate()?;
    Ok(GopSchedule {
        entries: build(cfg.mode, cfg.gop_size, cfg.p_count, cfg.i_count, 0, 0),
    })
}

/// Schedules of consecutive closed GoPs covering `frame_count` frames; the
/// last GoP may be shorter and has its anchor counts clamped.
pub fn sequence_schedule(cfg: &GopConfig, frame_count: usize) -> Result<Vec<GopSchedule>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let mut start = 0;
    while start < frame_count {
        let n = cfg.gop_size.min(frame_count - start);
        out.push(GopSchedule {
            entries: build(cfg.mode, n, cfg.p_count, cfg.i_count, start, start),
        });
        start += n;
    }
    Ok(out)
}

impl GopSchedule {
    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(I, P, B)` counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let count = |t| self.entries.iter().filter(|e| e.frame_type == t).count();
        (count(FrameType::I), count(FrameType::P), count(FrameType::B))
    }

    pub fn by_display(&self, display_index: usize) -> Option<&ScheduleEntry> {
        self.entries.iter().find(|e| e.display_index == display_index)
    }

    /// Checks reference arity per frame type, that every display index
    /// appears once, and that references are coded before their users.
    pub fn validate(&self) -> Result<()> {
        let min = self.entries.iter().map(|e| e.display_index).min().unwrap_or(0);
        let mut coded = vec![false; self.entries.len()];
        for (k, e) in self.entries.iter().enumerate() {
            if e.coding_order != self.entries[0].coding_order + k {
                return Err(Error::InvalidGop(format!("entry {k} has coding order {}", e.coding_order)));
            }
            let arity_ok = match e.frame_type {
                FrameType::I => e.past_ref.is_none() && e.future_ref.is_none(),
                FrameType::P => e.past_ref.is_some() && e.future_ref.is_none(),
                FrameType::B => e.past_ref.is_some() && e.future_ref.is_some(),
            };
            if !arity_ok {
                return Err(Error::InvalidGop(format!("frame {} has wrong reference arity", e.display_index)));
            }
            for r in [e.past_ref, e.future_ref].into_iter().flatten() {
                let ok = r.checked_sub(min).and_then(|i| coded.get(i).copied()).unwrap_or(false);
                if !ok {
                    return Err(Error::InvalidGop(format!(
                        "frame {} references {r} before it is coded",
                        e.display_index
                    )));
                }
            }
            if e.past_ref.is_some_and(|r| r >= e.display_index) || e.future_ref.is_some_and(|r| r <= e.display_index) {
                return Err(Error::InvalidGop(format!("frame {} has misdirected references", e.display_index)));
            }
            let slot = e
                .display_index
                .checked_sub(min)
                .and_then(|i| coded.get_mut(i))
                .ok_or_else(|| Error::InvalidGop(format!("display index {} out of range", e.display_index)))?;
            if *slot {
                return Err(Error::InvalidGop(format!("display index {} scheduled twice", e.display_index)));
            }
            *slot = true;
        }
        Ok(())
    }

    /// One line per entry: `coding_order display_index type past future`,
    /// with `-` for an absent reference.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let r = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
        for e in &self.entries {
            writeln!(
                s,
                "{} {} {} {} {}",
                e.coding_order,
                e.display_index,
                e.frame_type,
                r(e.past_ref),
                r(e.future_ref)
            )
            .unwrap();
        }
        s
    }
}
