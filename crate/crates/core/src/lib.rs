//! Green and solar roof registries from segmentation masks.
//!
//! The pipeline runs per city: probability masks on slippy-map tiles are
//! thresholded, cleaned of speckles and traced into georeferenced polygons
//! ([`vectorize`]); those polygons label the building footprints they
//! significantly overlap ([`tagging`]). Registries can be scored against
//! ground truth ([`metrics`]) and compared across cities with a min-max
//! normalized penetration index ([`index`]).
//!
//! [`segment`] holds a colour-rule mask provider used for fixtures, and
//! [`synthetic`] generates a painted test city with a known answer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod cli;
pub mod config;
pub mod error;
pub mod footprints;
pub mod geojson_io;
pub mod geometry;
pub mod index;
pub mod layout;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod segment;
pub mod synthetic;
pub mod tagging;
pub mod tilegrid;
pub mod vectorize;

pub use error::{Error, Result};

/// Roof feature class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Typology {
    Green,
    Solar,
}

impl Typology {
    pub const ALL: [Typology; 2] = [Typology::Green, Typology::Solar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Typology::Green => "green",
            Typology::Solar => "solar",
        }
    }
}

impl fmt::Display for Typology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Typology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "green" => Ok(Typology::Green),
            "solar" => Ok(Typology::Solar),
            other => Err(Error::data(format!("unknown typology {other:?}"))),
        }
    }
}
