//! Random moving-dots stimuli.
//!
//! Each stimulus has 10 dots sampled at 5 frames one time unit apart. Half of
//! the dots move coherently, one lattice cell in x and in y per frame along a
//! shared diagonal; the other half pick a fresh random heading every frame at
//! their own speed. Positions wrap around the grid edges. Angles follow the
//! mathematical convention: `+x` right, `+y` up, counter-clockwise positive.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{SimConfig, STIMULUS_STEPS};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rng::{RngStream, StreamId};

pub const STIMULI_PER_DATASET: usize = 100;
pub const DOTS_PER_STIMULUS: usize = 10;
pub const COHERENT_DOTS: usize = 5;
pub const RANDOM_SPEED: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Deg45,
    Deg135,
    DegMinus135,
    DegMinus45,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Deg45,
        Direction::Deg135,
        Direction::DegMinus135,
        Direction::DegMinus45,
    ];

    pub fn degrees(self) -> i32 {
        match self {
            Direction::Deg45 => 45,
            Direction::Deg135 => 135,
            Direction::DegMinus135 => -135,
            Direction::DegMinus45 => -45,
        }
    }

    pub fn from_degrees(deg: i32) -> Result<Self> {
        match deg.rem_euclid(360) {
            45 => Ok(Direction::Deg45),
            135 => Ok(Direction::Deg135),
            225 => Ok(Direction::DegMinus135),
            315 => Ok(Direction::DegMinus45),
            _ => Err(Error::Argument(format!("{deg} degrees is not one of the four diagonals"))),
        }
    }

    /// Position of this direction in [`Direction::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// One frame of coherent motion: one cell along each axis.
    pub fn step(self) -> (i64, i64) {
        match self {
            Direction::Deg45 => (1, 1),
            Direction::Deg135 => (-1, 1),
            Direction::DegMinus135 => (-1, -1),
            Direction::DegMinus45 => (1, -1),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

/// One input spike: grid cell and frame index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InputSpike {
    pub x: u16,
    pub y: u16,
    pub t: u8,
    /// Emitted by a coherently moving dot.
    pub coherent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub id: u32,
    pub direction: Direction,
    /// Sorted by `(t, y, x)`, one entry per distinct `(x, y, t)`.
    pub spikes: Vec<InputSpike>,
}

/// Lattice positions of one dot, one per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DotTrack {
    pub coherent: bool,
    pub speed: f64,
    pub cells: Vec<(usize, usize)>,
}

impl Stimulus {
    /// Merge dot positions into spikes; coincident `(x, y, t)` samples
    /// collapse to one spike, coherent if any contributing dot was.
    pub fn from_tracks(id: u32, direction: Direction, tracks: &[DotTrack]) -> Self {
        let mut merged: BTreeMap<(u8, u16, u16), bool> = BTreeMap::new();
        for track in tracks {
            for (t, &(x, y)) in track.cells.iter().enumerate() {
                let entry = merged.entry((t as u8, y as u16, x as u16)).or_insert(false);
                *entry |= track.coherent;
            }
        }
        let spikes = merged
            .into_iter()
            .map(|((t, y, x), coherent)| InputSpike { x, y, t, coherent })
            .collect();
        Stimulus { id, direction, spikes }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub grid_height: usize,
    pub grid_width: usize,
    pub stimuli: Vec<Stimulus>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    /// Stimulus count per direction, indexed like [`Direction::ALL`].
    pub fn direction_histogram(&self) -> [usize; 4] {
        let mut hist = [0; 4];
        for s in &self.stimuli {
            hist[s.direction.index()] += 1;
        }
        hist
    }
}

#[inline]
fn wrap(v: i64, n: usize) -> usize {
    v.rem_euclid(n as i64) as usize
}

/// Positions of a coherent dot after `0..=steps` moves, wrapped into a
/// `grid_height x grid_width` torus. `start` is `(x, y)`.
pub fn coherent_trajectory(
    start: (usize, usize),
    degrees: i32,
    steps: usize,
    grid_height: usize,
    grid_width: usize,
) -> Result<Vec<(usize, usize)>> {
    let direction = Direction::from_degrees(degrees)?;
    Ok(coherent_cells(start, direction, steps, grid_height, grid_width))
}

fn coherent_cells(
    start: (usize, usize),
    direction: Direction,
    steps: usize,
    grid_height: usize,
    grid_width: usize,
) -> Vec<(usize, usize)> {
    let (dx, dy) = direction.step();
    (0..=steps as i64)
        .map(|t| {
            (
                wrap(start.0 as i64 + t * dx, grid_width),
                wrap(start.1 as i64 + t * dy, grid_height),
            )
        })
        .collect()
}

fn random_track(rng: &mut RngStream, grid_height: usize, grid_width: usize) -> DotTrack {
    let (w, h) = (grid_width as f64, grid_height as f64);
    let mut x = rng.uniform(0.0, w);
    let mut y = rng.uniform(0.0, h);
    let speed = rng.uniform(RANDOM_SPEED.0, RANDOM_SPEED.1);
    let mut cells = Vec::with_capacity(STIMULUS_STEPS);
    for t in 0..STIMULUS_STEPS {
        if t > 0 {
            let heading = rng.uniform(0.0, std::f64::consts::TAU);
            x = (x + speed * heading.cos()).rem_euclid(w);
            y = (y + speed * heading.sin()).rem_euclid(h);
        }
        cells.push((wrap(x.round() as i64, grid_width), wrap(y.round() as i64, grid_height)));
    }
    DotTrack {
        coherent: false,
        speed,
        cells,
    }
}

/// Dot tracks of stimulus `index`: the coherent dots first, then the random ones.
pub fn generate_tracks(cfg: &SimConfig, seed: u64, index: u32, direction: Direction) -> Vec<DotTrack> {
    let (h, w) = (cfg.grid_height, cfg.grid_width);
    let mut rng = RngStream::substream(seed, StreamId::Dataset, index + 1);
    let mut tracks = Vec::with_capacity(DOTS_PER_STIMULUS);
    for _ in 0..COHERENT_DOTS {
        let start = (rng.below(w), rng.below(h));
        tracks.push(DotTrack {
            coherent: true,
            speed: 1.0,
            cells: coherent_cells(start, direction, STIMULUS_STEPS - 1, h, w),
        });
    }
    for _ in COHERENT_DOTS..DOTS_PER_STIMULUS {
        tracks.push(random_track(&mut rng, h, w));
    }
    tracks
}

/// Balanced direction schedule: each diagonal 25 times, shuffled by `seed`.
pub fn direction_schedule(seed: u64) -> Vec<Direction> {
    let mut dirs: Vec<Direction> = (0..STIMULI_PER_DATASET).map(|i| Direction::ALL[i % 4]).collect();
    RngStream::substream(seed, StreamId::Dataset, 0).shuffle(&mut dirs);
    dirs
}

/// The 100-stimulus moving-dots dataset for `seed`.
pub fn generate_dataset(cfg: &SimConfig, seed: u64) -> Dataset {
    generate_dataset_with(cfg, seed, Exec::default())
}

pub fn generate_dataset_with(cfg: &SimConfig, seed: u64, exec: Exec) -> Dataset {
    let dirs = direction_schedule(seed);
    let stimuli = par::map_indexed(exec, &dirs, |i, &dir| {
        let tracks = generate_tracks(cfg, seed, i as u32, dir);
        Stimulus::from_tracks(i as u32, dir, &tracks)
    });
    Dataset {
        grid_height: cfg.grid_height,
        grid_width: cfg.grid_width,
        stimuli,
    }
}

/// Render in the `mdots v1` text format.
pub fn dataset_to_text(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mdots v1 grid={}x{} stimuli={}",
        ds.grid_height,
        ds.grid_width,
        ds.stimuli.len()
    );
    for s in &ds.stimuli {
        let _ = writeln!(out, "S {} dir={}", s.id, s.direction);
        for sp in &s.spikes {
            let _ = writeln!(out, "{} {} {} {}", sp.x, sp.y, sp.t, u8::from(sp.coherent));
        }
    }
    out
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset_to_text(ds)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

fn field<'a>(token: Option<&'a str>, prefix: &str, line: usize) -> Result<&'a str> {
    token
        .and_then(|t| t.strip_prefix(prefix))
        .ok_or_else(|| Error::parse(line, format!("expected `{prefix}...`")))
}

fn number<T: std::str::FromStr>(token: Option<&str>, what: &str, line: usize) -> Result<T> {
    let token = token.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what} `{token}`")))
}

/// Parse the `mdots v1` text format. An empty input is an empty dataset.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let Some((_, header)) = lines.next() else {
        return Ok(Dataset {
            grid_height: 0,
            grid_width: 0,
            stimuli: Vec::new(),
        });
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("mdots") || tok.next() != Some("v1") {
        return Err(Error::parse(1, "expected header `mdots v1 grid=HxW stimuli=N`"));
    }
    let grid = field(tok.next(), "grid=", 1)?;
    let (h, w) = grid
        .split_once('x')
        .ok_or_else(|| Error::parse(1, format!("bad grid `{grid}`")))?;
    let grid_height: usize = number(Some(h), "grid height", 1)?;
    let grid_width: usize = number(Some(w), "grid width", 1)?;
    let expected: usize = number(Some(field(tok.next(), "stimuli=", 1)?), "stimulus count", 1)?;
    if tok.next().is_some() {
        return Err(Error::parse(1, "trailing tokens in header"));
    }

    let mut stimuli: Vec<Stimulus> = Vec::with_capacity(expected);
    let mut last_line = 1;
    for (line, raw) in lines {
        last_line = line;
        let mut tok = raw.split_whitespace();
        match tok.clone().next() {
            None => return Err(Error::parse(line, "empty line")),
            Some("S") => {
                tok.next();
                let id: u32 = number(tok.next(), "stimulus id", line)?;
                let deg: i32 = number(Some(field(tok.next(), "dir=", line)?), "direction", line)?;
                let direction = Direction::from_degrees(deg).map_err(|e| Error::parse(line, e.to_string()))?;
                if tok.next().is_some() {
                    return Err(Error::parse(line, "trailing tokens"));
                }
                stimuli.push(Stimulus {
                    id,
                    direction,
                    spikes: Vec::new(),
                });
            }
            Some(_) => {
                let x: u16 = number(tok.next(), "x", line)?;
                let y: u16 = number(tok.next(), "y", line)?;
                let t: u8 = number(tok.next(), "t", line)?;
                let coherent = match tok.next() {
                    Some("0") => false,
                    Some("1") => true,
                    Some(other) => return Err(Error::parse(line, format!("bad coherent flag `{other}`"))),
                    None => return Err(Error::parse(line, "missing coherent flag")),
                };
                if tok.next().is_some() {
                    return Err(Error::parse(line, "trailing tokens"));
                }
                if x as usize >= grid_width || y as usize >= grid_height {
                    return Err(Error::parse(line, format!("spike ({x}, {y}) outside the grid")));
                }
                if t as usize >= STIMULUS_STEPS {
                    return Err(Error::parse(line, format!("spike time {t} outside 0..{STIMULUS_STEPS}")));
                }
                let stim = stimuli
                    .last_mut()
                    .ok_or_else(|| Error::parse(line, "spike before any `S` record"))?;
                stim.spikes.push(InputSpike { x, y, t, coherent });
            }
        }
    }
    if stimuli.len() != expected {
        return Err(Error::parse(
            last_line,
            format!("header declares {expected} stimuli, found {}", stimuli.len()),
        ));
    }
    Ok(Dataset {
        grid_height,
        grid_width,
        stimuli,
    })
}
