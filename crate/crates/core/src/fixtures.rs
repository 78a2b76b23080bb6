//! Small hand-written models shared by tests, docs and the CLI.

/// Four-step chain `s0 -> s1 -> s2 -> s3` over one parameter `v`, with every
/// failed step falling into the sink `s4`. Reaching `s3` has probability
/// `v * (1 - v) * v`.
pub const SINGLE_PARAM_CHAIN: &str = "\
# s0 -v-> s1 -(1-v)-> s2 -v-> s3, everything else to the sink s4
@type pmc
@parameters v
@initial s0
@targets s3
s0 s1 v
s0 s4 1 - v
s1 s2 1 - v
s1 s4 v
s2 s3 v
s2 s4 1 - v
s3 s3 1
s4 s4 1
";

/// Two parameters drawn from a shared simplex: `p + q + r = 1` with
/// `r = 1 - p - q`, so the well-defined region is a triangle, not a box.
pub const SIMPLEX_PMDP: &str = "\
@type pmdp
@parameters p [1/100000, 99999/100000] q [1/100000, 99999/100000]
@initial s0
@targets goal
s0 send goal p
s0 send s1 q
s0 send fail 1 - p - q
s0 wait s1 1
s1 retry goal 1/2
s1 retry s0 1/2
goal done goal 1
fail done fail 1
";
