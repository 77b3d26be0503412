pub mod equivalence;
pub mod oracle;
pub mod random_matrix;
