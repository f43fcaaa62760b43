use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of failures, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: unreadable files, parse errors, invalid parameters.
    Input,
    /// A linear system or geometric construction could not be solved.
    Numerical,
    /// The mesh connectivity violates a manifold or compatibility requirement.
    Topology,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("vertex index {index} out of range for {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("triangle {0} duplicates an earlier triangle")]
    DuplicateTriangle(usize),
    #[error("edge ({0}, {1}) is incident on more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("vertex {0} is incident on more than one fan of triangles")]
    NonManifoldVertex(usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by both of its triangles")]
    InconsistentOrientation(usize, usize),
    #[error("mesh has {0} connected components")]
    Disconnected(usize),
    #[error("edge ({0}, {1}) not found")]
    EdgeNotFound(usize, usize),
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("coarse mesh is empty")]
    EmptyCoarse,
    #[error("decimation changed the topology: {0}")]
    TopologyChanged(String),

    #[error("the global system is singular even after clamping negative weights")]
    SingularSystem,
    #[error("hard-constraint solve requested with no handles")]
    NoHandles,

    #[error("triangle {0} and all of its edge neighbours are degenerate")]
    DegenerateNeighborhood(usize),
    #[error("deformed coarse mesh does not share the rest connectivity")]
    IncompatibleCoarse,
    #[error("deformed positions do not match the rest connectivity")]
    IncompatibleConnectivity,
    #[error("rest edge ({0}, {1}) has zero length")]
    ZeroLengthRestEdge(usize, usize),
    #[error("volume requested for a mesh with boundary")]
    OpenMesh,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face has fewer than three vertices")]
    NonTriangulatableFace { line: usize },
    #[error("line {line}: vertex {vertex} already has a handle")]
    DuplicateHandle { line: usize, vertex: usize },
    #[error("correspondence cache mismatch: {0}")]
    CacheMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("need at least 4 non-coplanar landmarks, got {0}")]
    InsufficientLandmarks(usize),
    #[error("source rest and posed meshes are not deformation-compatible")]
    IncompatibleSourcePair,
    #[error("sparse map covers {mapped} of {required} required coarse vertices")]
    SparseMapTooSmall { mapped: usize, required: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            EmptyMesh | IndexOutOfRange { .. } | SizeMismatch { .. } | NonFinite(_) | Parse { .. }
            | NonTriangulatableFace { .. } | DuplicateHandle { .. } | CacheMismatch(_) | Io(_)
            | InsufficientLandmarks(_) | SparseMapTooSmall { .. } | InvalidParams(_)
            | NoHandles | EmptyCoarse => ErrorKind::Input,
            SingularSystem | DegenerateNeighborhood(_) | ZeroLengthRestEdge(..) => {
                ErrorKind::Numerical
            }
            DegenerateTriangle(_) | DuplicateTriangle(_) | NonManifoldEdge(..)
            | NonManifoldVertex(_) | InconsistentOrientation(..) | Disconnected(_)
            | EdgeNotFound(..) | TopologyChanged(_) | IncompatibleCoarse
            | IncompatibleConnectivity | OpenMesh | IncompatibleSourcePair => ErrorKind::Topology,
        }
    }
}
