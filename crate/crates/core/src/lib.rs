pub mod dynamics;
pub mod milp;
pub mod risk;
pub mod scenario;
pub mod stage1;
pub mod stage2;
pub mod stl;
