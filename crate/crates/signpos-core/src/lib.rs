//! Sign structure of 1-D J1-J2 Heisenberg ground states under diagonal
//! single-qubit rotations and CZ layers.
//!
//! The crate builds spin-1/2 chain Hamiltonians restricted to fixed-Sz
//! sectors, diagonalizes them, measures how negative the ground-state
//! amplitudes are, and transforms both states and operators by "protocols":
//! layers of diagonal phase gates (angles quantized to multiples of pi/2)
//! optionally followed by a layer of CZ gates on disjoint pairs. Exhaustive
//! and structured searches over protocols, parameter sweeps, entanglement
//! entropies, and file I/O for states, protocols, tables, and charts sit on
//! top.

pub mod error;
pub mod lattice;
pub mod hamiltonian;
pub mod eigen;
pub mod protocol;
pub mod subspace;
pub mod search;
pub mod sweeps;
pub mod statefile;
pub mod csvio;
pub mod svg;

pub use error::{Error, Result};
pub use lattice::{build_chain, chain_distance, enumerate_sector, Boundary, ChainModel, SectorBasis};
pub use hamiltonian::{
    conjugate_by_cz, conjugate_by_diagonal, dense_matrix, even_odd_transformed, heisenberg_terms,
    CompiledIR, FactorKind, HamiltonianIR, HamiltonianTerm, OperatorFactor,
};
pub use eigen::{
    canonicalize_real, degeneracy_groups, dense_spectrum, ground_level, lowest_eigenpairs,
    EigenOptions, EigenResult,
};
pub use protocol::{
    apply_protocol, apply_protocol_real, mg_product_state, overlap_abs, overlap_abs_real,
    sign_average, sign_report, Protocol, SignReport,
};
pub use subspace::{
    max_sign_in_subspace, max_sign_transformed, positivize_degenerate_subspace,
    positivize_transformed, SubspaceOutcome,
};
pub use search::{
    brute_force_search, cz_matchings, enumerate_single_qubit_protocols, search_mpr_plus_cz,
    template_search, RankedProtocol, SearchConfig, SearchResult, SearchResultRow,
};
pub use sweeps::{
    bipartition_masks, default_j2_grid, entanglement_entropy, entanglement_entropy_real,
    metrics_for_protocol, minimum_location, reference_overlap_curves, run_sweep, solve_ground,
    OverlapCurves, Partition, ProtocolChoice, SweepRow, SweepSpec,
};
pub use csvio::EntropyRow;
pub use statefile::{read_state_file, write_state_file, StateRecord};
pub use svg::{line_chart, Series};
