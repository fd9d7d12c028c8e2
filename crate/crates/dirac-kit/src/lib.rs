pub mod exactla;
pub mod polycal;
pub mod qlie;
pub mod relations;
pub mod courant;
pub mod shifted;
pub mod weil;
pub mod grpnum;
