pub mod bench;
pub mod det;
pub mod error;
pub mod feasibility;
pub mod heuristic;
pub mod instance;
pub mod oracle;
pub mod robust;
pub mod types;

pub use error::{PricingError, Result};
pub use feasibility::FEASIBILITY_TOL;
pub use types::{
    Allocation, DiscreteScenarioSet, IntervalUncertainty, ItemPrice, PricingSolution, UtilityVector, ValuationMatrix,
};
