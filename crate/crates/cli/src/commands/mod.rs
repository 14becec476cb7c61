pub mod calibrate;
pub mod forecast;
pub mod mc;
pub mod ode;
pub mod paths;
pub mod price;
pub mod quad;
pub mod sde;
pub mod study;

use stochkit::RandomStream;

/// Root stream of a command; the label keeps commands on disjoint families.
pub(crate) fn root(seed: u64, label: u64) -> RandomStream {
    RandomStream::new(seed, 0).fork(label)
}
