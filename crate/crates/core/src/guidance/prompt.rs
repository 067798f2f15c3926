use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewTag {
    Front,
    Side,
    Back,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    Body,
    Face,
}

impl fmt::Display for ViewTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewTag::Front => "Front",
            ViewTag::Side => "Side",
            ViewTag::Back => "Back",
        })
    }
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BodyPart::Body => "body",
            BodyPart::Face => "face",
        })
    }
}

/// View label for a camera azimuth. `phi = 0` looks at the back of the
/// avatar and `phi = pi` at its front; boundaries belong to the named
/// front/back regions.
pub fn view_for_azimuth(phi: f64) -> ViewTag {
    let phi = phi.rem_euclid(TAU);
    if phi <= PI / 6.0 || phi >= TAU - PI / 6.0 {
        ViewTag::Back
    } else if (5.0 * PI / 6.0..=7.0 * PI / 6.0).contains(&phi) {
        ViewTag::Front
    } else {
        ViewTag::Side
    }
}

/// `"{View} view of the {body|face} of {prompt}"`.
pub fn augment_prompt(prompt: &str, part: BodyPart, phi: f64) -> String {
    format!("{} view of the {} of {}", view_for_azimuth(phi), part, prompt)
}
