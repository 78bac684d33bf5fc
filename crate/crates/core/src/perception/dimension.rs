use std::fmt;

use serde::{Deserialize, Serialize};

/// The seven rated perception dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    CyclingAttractiveness,
    Spaciousness,
    Cleanliness,
    BuildingDesignAttractiveness,
    Safety,
    Beauty,
    LivingAttractiveness,
}

impl Dimension {
    pub const ALL: [Dimension; 7] = [
        Dimension::CyclingAttractiveness,
        Dimension::Spaciousness,
        Dimension::Cleanliness,
        Dimension::BuildingDesignAttractiveness,
        Dimension::Safety,
        Dimension::Beauty,
        Dimension::LivingAttractiveness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::CyclingAttractiveness => "cycling_attractiveness",
            Dimension::Spaciousness => "spaciousness",
            Dimension::Cleanliness => "cleanliness",
            Dimension::BuildingDesignAttractiveness => "building_design_attractiveness",
            Dimension::Safety => "safety",
            Dimension::Beauty => "beauty",
            Dimension::LivingAttractiveness => "living_attractiveness",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
