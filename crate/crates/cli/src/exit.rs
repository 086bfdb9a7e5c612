//! Process exit codes: 0 success, 1 usage or configuration error, 2 data
//! error, 3 numeric failure.

use std::fmt;

use dilifilter_core::Error as CoreError;

pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERIC: i32 = 3;

/// Context marker for configuration and usage problems.
#[derive(Debug, Clone, Copy)]
pub struct ConfigError;

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("configuration error")
    }
}

impl ConfigError {
    pub fn wrap(e: anyhow::Error) -> anyhow::Error {
        e.context(ConfigError)
    }
}

/// Context marker for problems with input data.
#[derive(Debug, Clone, Copy)]
pub struct DataError;

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("data error")
    }
}

impl DataError {
    pub fn wrap(e: anyhow::Error) -> anyhow::Error {
        e.context(DataError)
    }
}

fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Context { source, .. } => core_code(source),
        CoreError::InvalidConfig(_) => USAGE,
        CoreError::NonFinite(_) => NUMERIC,
        _ => DATA,
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return USAGE;
    }
    if err.downcast_ref::<DataError>().is_some() {
        return DATA;
    }
    err.chain()
        .find_map(|e| e.downcast_ref::<CoreError>())
        .map_or(DATA, core_code)
}

/// The error chain joined by `: `, skipping causes whose text the previous
/// message already ends with.
pub fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if last.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
        last = text;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_innermost_core_error() {
        let numeric = anyhow::Error::new(CoreError::NonFinite("loss".into()).context("fitting"));
        assert_eq!(exit_code(&numeric.context("train")), NUMERIC);
        let config = anyhow::Error::new(CoreError::InvalidConfig("C".into()));
        assert_eq!(exit_code(&config), USAGE);
        let data = anyhow::Error::new(CoreError::DuplicateId("p1".into()));
        assert_eq!(exit_code(&data), DATA);
        assert_eq!(
            exit_code(&ConfigError::wrap(anyhow::anyhow!("x")).context("outer")),
            USAGE
        );
    }

    #[test]
    fn describe_drops_causes_already_in_the_message() {
        let inner = CoreError::InvalidConfig("table 1 missing".into()).context("vectorizing");
        let e = anyhow::Error::new(inner).context("train");
        assert_eq!(
            describe(&e),
            "train: vectorizing: invalid configuration: table 1 missing"
        );
        let plain = anyhow::anyhow!("root").context("mid").context("top");
        assert_eq!(describe(&plain), "top: mid: root");
    }
}
