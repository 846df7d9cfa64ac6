//! Class rasters of 2-D classifiers and agreement rasters of model pairs,
//! written as plain PGM with a JSON sidecar.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.min[0] < self.max[0] && self.min[1] < self.max[1]) {
            return Err(Error::Config(format!(
                "bbox min {:?} must be below max {:?}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// Center of cell (`row`, `col`); row 0 is the top edge (largest y).
    pub fn cell_center(&self, resolution: usize, row: usize, col: usize) -> [f64; 2] {
        let r = resolution as f64;
        let w = (self.max[0] - self.min[0]) / r;
        let h = (self.max[1] - self.min[1]) / r;
        [
            self.min[0] + (col as f64 + 0.5) * w,
            self.max[1] - (row as f64 + 0.5) * h,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Cell value is the predicted class.
    Class,
    /// Cell value is the shared class where both models agree and
    /// `num_classes` where they disagree.
    Agreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGrid {
    pub kind: GridKind,
    pub bbox: BBox,
    pub resolution: usize,
    pub num_classes: usize,
    /// Rows top to bottom, columns left to right.
    pub cells: Vec<Vec<u8>>,
}

/// Sidecar metadata written next to a PGM raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub kind: GridKind,
    pub bbox: BBox,
    pub resolution: usize,
    pub num_classes: usize,
    pub maxval: u8,
    pub disagreement_fraction: Option<f64>,
    pub row_order: String,
}

fn check_2d(net: &Network) -> Result<()> {
    if net.input_dim() != 2 {
        return Err(Error::Config(format!(
            "rasters need 2-D inputs, model has {}",
            net.input_dim()
        )));
    }
    if net.spec().num_classes() > 254 {
        return Err(Error::Config("too many classes for a raster".into()));
    }
    Ok(())
}

fn check_resolution(bbox: &BBox, resolution: usize) -> Result<()> {
    bbox.validate()?;
    if resolution == 0 {
        return Err(Error::Config("resolution must be >= 1".into()));
    }
    Ok(())
}

pub fn raster_2d(net: &Network, bbox: &BBox, resolution: usize) -> Result<ClassGrid> {
    check_2d(net)?;
    check_resolution(bbox, resolution)?;
    let cells = (0..resolution)
        .map(|r| {
            (0..resolution)
                .map(|c| net.predict(&bbox.cell_center(resolution, r, c)) as u8)
                .collect()
        })
        .collect();
    Ok(ClassGrid {
        kind: GridKind::Class,
        bbox: *bbox,
        resolution,
        num_classes: net.spec().num_classes(),
        cells,
    })
}

pub fn raster_pair(a: &Network, b: &Network, bbox: &BBox, resolution: usize) -> Result<ClassGrid> {
    check_2d(a)?;
    check_2d(b)?;
    if a.spec().num_classes() != b.spec().num_classes() {
        return Err(Error::Config("raster pair needs models with the same classes".into()));
    }
    let ga = raster_2d(a, bbox, resolution)?;
    let gb = raster_2d(b, bbox, resolution)?;
    let m = ga.num_classes as u8;
    let cells = ga
        .cells
        .iter()
        .zip(&gb.cells)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| if x == y { *x } else { m }).collect())
        .collect();
    Ok(ClassGrid {
        kind: GridKind::Agreement,
        cells,
        ..ga
    })
}

impl ClassGrid {
    pub fn maxval(&self) -> u8 {
        match self.kind {
            GridKind::Class => (self.num_classes as u8 - 1).max(1),
            GridKind::Agreement => self.num_classes as u8,
        }
    }

    /// Share of cells where the two models disagree (`None` for class grids).
    pub fn disagreement_fraction(&self) -> Option<f64> {
        if self.kind != GridKind::Agreement {
            return None;
        }
        let m = self.num_classes as u8;
        let n = self.cells.iter().flatten().filter(|v| **v == m).count();
        Some(n as f64 / (self.resolution * self.resolution) as f64)
    }

    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n{}\n", self.resolution, self.resolution, self.maxval());
        for row in &self.cells {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn sidecar(&self) -> RasterSidecar {
        RasterSidecar {
            kind: self.kind,
            bbox: self.bbox,
            resolution: self.resolution,
            num_classes: self.num_classes,
            maxval: self.maxval(),
            disagreement_fraction: self.disagreement_fraction(),
            row_order: "top_to_bottom".into(),
        }
    }

    /// Writes `<stem>.pgm` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let pgm = dir.join(format!("{stem}.pgm"));
        std::fs::write(&pgm, self.to_pgm()).map_err(|e| Error::io(&pgm, e))?;
        let json = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dense, NetworkMeta};

    fn constant(bias: f64) -> Network {
        Network::from_layers(
            vec![Dense {
                weights: vec![vec![0.0, 0.0]],
                bias: vec![bias],
            }],
            NetworkMeta::default(),
        )
        .unwrap()
    }

    const BOX: BBox = BBox {
        min: [-1.0, -1.0],
        max: [1.0, 1.0],
    };

    #[test]
    fn identical_pair_never_disagrees() {
        let g = raster_pair(&constant(1.0), &constant(1.0), &BOX, 5).unwrap();
        assert_eq!(g.disagreement_fraction(), Some(0.0));
    }

    #[test]
    fn opposite_constants_always_disagree() {
        let g = raster_pair(&constant(-1.0), &constant(1.0), &BOX, 4).unwrap();
        assert_eq!(g.disagreement_fraction(), Some(1.0));
        assert!(g.cells.iter().flatten().all(|v| *v == 2));
    }

    #[test]
    fn single_cell_and_row_order() {
        // f = y: the top half is class 1
        let net = Network::from_layers(
            vec![Dense {
                weights: vec![vec![0.0, 1.0]],
                bias: vec![0.0],
            }],
            NetworkMeta::default(),
        )
        .unwrap();
        let g = raster_2d(&net, &BOX, 2).unwrap();
        assert_eq!(g.cells, vec![vec![1, 1], vec![0, 0]]);
        assert_eq!(raster_2d(&net, &BOX, 1).unwrap().cells.len(), 1);
        assert_eq!(g.to_pgm(), "P2\n2 2\n1\n1 1\n0 0\n");
    }

    #[test]
    fn non_2d_models_are_rejected() {
        let net = Network::from_layers(
            vec![Dense {
                weights: vec![vec![1.0, 0.0, 0.0]],
                bias: vec![0.0],
            }],
            NetworkMeta::default(),
        )
        .unwrap();
        assert!(raster_2d(&net, &BOX, 3).is_err());
    }
}
