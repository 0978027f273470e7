//! Shared identifier vocabulary used across the simulator's subsystems.

use std::fmt;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident, $inner:ty) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(/// A network node (center, router, station, server host).
    NodeId, u32);
id_type!(/// A network link.
    LinkId, u32);
id_type!(/// An in-flight or completed file movement.
    TransferId, u64);
id_type!(/// A cataloged data file.
    FileId, u64);
id_type!(/// A regional center (or cluster element acting as one).
    CenterId, u32);
id_type!(/// A database (disk) server.
    ServerId, u32);
id_type!(/// A mass-storage (tape) unit.
    MassId, u32);
id_type!(/// A unit of CPU work bound to input files.
    JobId, u64);

/// Data file classes recognized by the catalog and metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FileClass {
    Raw,
    Dst,
}

impl fmt::Display for FileClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FileClass::Raw => write!(f, "RAW"),
            FileClass::Dst => write!(f, "DST"),
        }
    }
}
