use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    reprojection_rmse, solve_homography, CalibrationError, CalibrationSet, Frame, Homography,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub from: Frame,
    pub to: Frame,
    pub homography: Homography,
    pub rmse: f64,
}

/// Stored pairwise maps between frames.
///
/// Maps that are not stored directly are derived on demand, by inversion or
/// composition through the third frame, and cached.
#[derive(Debug, Default)]
pub struct Calibration {
    entries: Vec<CalibrationEntry>,
    pub timestamp: String,
    cache: Mutex<HashMap<(Frame, Frame), Homography>>,
}

impl Clone for Calibration {
    fn clone(&self) -> Self {
        Self::from_entries(self.entries.clone(), self.timestamp.clone())
    }
}

impl PartialEq for Calibration {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.timestamp == other.timestamp
    }
}

/// On-disk layout: parallel arrays keyed by frame pair.
#[derive(Serialize, Deserialize)]
struct CalibrationFile {
    frames: Vec<(Frame, Frame)>,
    matrices: Vec<Homography>,
    rmse: Vec<f64>,
    timestamp: String,
}

impl Calibration {
    pub fn from_entries(entries: Vec<CalibrationEntry>, timestamp: String) -> Self {
        Self {
            entries,
            timestamp,
            cache: Mutex::default(),
        }
    }

    pub fn entries(&self) -> &[CalibrationEntry] {
        &self.entries
    }

    /// Solves each set and stores the result, replacing any map between the
    /// same pair of frames.
    pub fn solve(&mut self, sets: &[CalibrationSet]) -> Result<(), CalibrationError> {
        for set in sets {
            let homography = solve_homography(set)?;
            let rmse = reprojection_rmse(&homography, set)?;
            self.insert(CalibrationEntry {
                from: set.from,
                to: set.to,
                homography,
                rmse,
            });
        }
        self.timestamp = chrono::Utc::now().to_rfc3339();
        Ok(())
    }

    pub fn insert(&mut self, entry: CalibrationEntry) {
        self.entries.retain(|e| {
            !((e.from == entry.from && e.to == entry.to)
                || (e.from == entry.to && e.to == entry.from))
        });
        self.entries.push(entry);
        self.cache.lock().expect("cache lock").clear();
    }

    fn lookup(&self, from: Frame, to: Frame) -> Option<Result<Homography, CalibrationError>> {
        self.entries.iter().find_map(|e| {
            if e.from == from && e.to == to {
                Some(Ok(e.homography))
            } else if e.from == to && e.to == from {
                Some(e.homography.inverse())
            } else {
                None
            }
        })
    }

    /// The map taking `from` coordinates to `to` coordinates.
    pub fn map_between(&self, from: Frame, to: Frame) -> Result<Homography, CalibrationError> {
        if from == to {
            return Ok(Homography::IDENTITY);
        }
        if let Some(h) = self.cache.lock().expect("cache lock").get(&(from, to)) {
            return Ok(*h);
        }
        let h = match self.lookup(from, to) {
            Some(h) => h?,
            None => {
                let via = Frame::ALL
                    .into_iter()
                    .find(|f| *f != from && *f != to)
                    .expect("three frames");
                match (self.lookup(from, via), self.lookup(via, to)) {
                    (Some(a), Some(b)) => a?.then(&b?)?,
                    _ => return Err(CalibrationError::MissingMap { from, to }),
                }
            }
        };
        self.cache.lock().expect("cache lock").insert((from, to), h);
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        let file = CalibrationFile {
            frames: self.entries.iter().map(|e| (e.from, e.to)).collect(),
            matrices: self.entries.iter().map(|e| e.homography).collect(),
            rmse: self.entries.iter().map(|e| e.rmse).collect(),
            timestamp: self.timestamp.clone(),
        };
        serde_json::to_string_pretty(&file).expect("calibration serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, CalibrationError> {
        let file: CalibrationFile =
            serde_json::from_str(text).map_err(|e| CalibrationError::Invalid(e.to_string()))?;
        if file.frames.len() != file.matrices.len() || file.frames.len() != file.rmse.len() {
            return Err(CalibrationError::Invalid(
                "frames, matrices and rmse must have equal length".into(),
            ));
        }
        let entries = file
            .frames
            .into_iter()
            .zip(file.matrices)
            .zip(file.rmse)
            .map(|(((from, to), homography), rmse)| CalibrationEntry {
                from,
                to,
                homography,
                rmse,
            })
            .collect();
        Ok(Self::from_entries(entries, file.timestamp))
    }
}
