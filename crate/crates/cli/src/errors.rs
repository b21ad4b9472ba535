use std::fmt::Debug;

use gaia_core::archspace::{ScheduleError, SpaceError};
use gaia_core::config::ConfigError;
use gaia_core::costmodel::{BandError, LatencyError};
use gaia_core::evaluator::EvalError;
use gaia_core::labelspace::LabelError;
use gaia_core::report::ReportError;
use gaia_core::supernet::SupernetError;
use gaia_core::tsas::{SearchError, TauError};
use gaia_core::tsds::SelectError;

/// Invalid flag combinations detected after parsing; exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Domain failure raised by the CLI itself.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("GradCheckFailed: max relative error {0:e} exceeds {1:e}")]
    GradCheckFailed(f64, f64),
}

// variants that only wrap another typed error
const WRAPPERS: [&str; 6] = ["Eval", "Space", "Tau", "Schedule", "Config", "Io"];

fn variant_name<E: Debug>(e: &E) -> String {
    let dbg = format!("{e:?}");
    let mut rest = dbg.as_str();
    loop {
        let end = rest.find(|c: char| !c.is_alphanumeric() && c != '_').unwrap_or(rest.len());
        let name = &rest[..end];
        let inner = &rest[end..];
        if WRAPPERS.contains(&name) && inner.starts_with('(') && inner[1..].starts_with(|c: char| c.is_uppercase()) {
            rest = &inner[1..];
            continue;
        }
        return name.to_string();
    }
}

/// Type-level name of the root domain error, e.g. `NoFeasibleGroup`.
pub fn typed_name(e: &anyhow::Error) -> String {
    macro_rules! try_as {
        ($($t:ty),*) => {
            $(if let Some(x) = e.downcast_ref::<$t>() {
                return variant_name(x);
            })*
        };
    }
    try_as!(
        LabelError,
        SpaceError,
        ScheduleError,
        BandError,
        LatencyError,
        EvalError,
        SearchError,
        TauError,
        SelectError,
        SupernetError,
        ReportError,
        ConfigError,
        CliError
    );
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "Io".into();
    }
    "Error".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unwrap_transparent_variants() {
        assert_eq!(typed_name(&anyhow::Error::new(SearchError::NoFeasibleGroup)), "NoFeasibleGroup");
        let nested = SearchError::Eval(EvalError::EndpointDown("gone".into()));
        assert_eq!(typed_name(&anyhow::Error::new(nested)), "EndpointDown");
        assert_eq!(typed_name(&anyhow::Error::new(TauError::AllTied)), "AllTied");
        assert_eq!(typed_name(&anyhow::anyhow!("plain")), "Error");
    }
}
