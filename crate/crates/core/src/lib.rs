pub mod evaluation;
pub mod format;
pub mod lp;
pub mod markets;
pub mod system;
pub mod uncertainty;
