//! Kernel snapshots: an exact numeric dump and a circle-grid drawing in which
//! a bigger circle is a shorter delay and a darker one a stronger weight.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{grid_of, Network};
use crate::types::{Kernel, KERNEL};

pub type Grid = [[f64; KERNEL]; KERNEL];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSnapshot {
    pub weights: Grid,
    pub delays: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub features: Vec<FeatureSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Numeric,
    Svg,
}

impl Snapshot {
    pub fn from_kernels(kernels: &[Kernel]) -> Self {
        let features = kernels
            .iter()
            .map(|k| FeatureSnapshot {
                weights: grid_of(k, |s| s.weight),
                delays: grid_of(k, |s| s.delay),
            })
            .collect();
        Snapshot { features }
    }

    pub fn of(net: &Network) -> Self {
        Self::from_kernels(net.kernels())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialises")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_svg(&self, w_min: f64, w_max: f64) -> String {
        render_svg(self, w_min, w_max)
    }
}

const PITCH: f64 = 20.0;
const MAX_RADIUS: f64 = 9.0;
const GAP: f64 = 20.0;

/// Circle radius for a delay, relative to the feature's own delay range.
pub fn circle_radius(d: f64, d_min: f64, d_max: f64) -> f64 {
    if d_max - d_min <= 0.0 {
        return MAX_RADIUS;
    }
    MAX_RADIUS * ((d_max - d) / (d_max - d_min)).clamp(0.0, 1.0)
}

/// 0 is white, 1 is black.
pub fn darkness(w: f64, w_min: f64, w_max: f64) -> f64 {
    if w_max - w_min <= 0.0 {
        return 1.0;
    }
    ((w - w_min) / (w_max - w_min)).clamp(0.0, 1.0)
}

fn render_svg(snap: &Snapshot, w_min: f64, w_max: f64) -> String {
    let side = PITCH * KERNEL as f64;
    let n = snap.features.len().max(1) as f64;
    let width = n * side + (n + 1.0) * GAP;
    let height = side + 2.0 * GAP;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (f, feat) in snap.features.iter().enumerate() {
        let flat = feat.delays.iter().flatten();
        let d_min = flat.clone().copied().fold(f64::INFINITY, f64::min);
        let d_max = flat.copied().fold(f64::NEG_INFINITY, f64::max);
        let ox = GAP + f as f64 * (side + GAP);
        let _ = writeln!(out, r#"  <g id="feature-{f}" transform="translate({ox} {GAP})">"#);
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let r = circle_radius(feat.delays[ky][kx], d_min, d_max);
                let level = (255.0 * (1.0 - darkness(feat.weights[ky][kx], w_min, w_max))).round() as u8;
                let cx = (kx as f64 + 0.5) * PITCH;
                let cy = (ky as f64 + 0.5) * PITCH;
                let _ = writeln!(
                    out,
                    r#"    <circle cx="{cx}" cy="{cy}" r="{r:.4}" fill="rgb({level},{level},{level})" stroke="black" stroke-width="0.5"/>"#
                );
            }
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_snapshot(snap: &Snapshot, path: &Path, format: SnapshotFormat, w_min: f64, w_max: f64) -> Result<()> {
    let text = match format {
        SnapshotFormat::Numeric => snap.to_json(),
        SnapshotFormat::Svg => snap.to_svg(w_min, w_max),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn export_snapshot(net: &Network, path: &Path, format: SnapshotFormat) -> Result<()> {
    let cfg = net.config();
    write_snapshot(&Snapshot::of(net), path, format, cfg.w_min, cfg.w_max)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Snapshot::from_json(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
