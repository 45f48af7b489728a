//! Verification instruments for computed solutions.

pub mod blowup;
pub mod pohozaev;
pub mod profiles;

pub use blowup::{blowup_rescale, decay_check, BlowupReport, Concentration, DecayReport, MaximumReport};
pub use pohozaev::{pohozaev_report, pohozaev_residual, PohozaevReport};
pub use profiles::{
    dichotomy_witness, ground_state_nd, soliton_norm_relation, soliton_profile_1d, soliton_residual,
    DichotomyWitness, GroundState,
};
