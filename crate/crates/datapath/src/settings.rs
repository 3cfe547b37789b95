use std::net::SocketAddr;

use datapath_core::headers::DEFAULT_ENUMERATION_LIMIT;

/// Service configuration, read from `DPD_LISTEN`, `DPD_ENUMERATION_LIMIT` and
/// `DPD_HISTORY_CAPACITY`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub listen: SocketAddr,
    /// Largest number of free header bits a traffic-type request may enumerate.
    pub enumeration_limit: u32,
    /// Probe results kept for `GET /probes`.
    pub history_capacity: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
            history_capacity: 256,
        }
    }
}

impl Settings {
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut s = Self::default();
        if let Some(v) = get("DPD_LISTEN") {
            s.listen = v.parse().map_err(|e| format!("DPD_LISTEN=`{v}`: {e}"))?;
        }
        if let Some(v) = get("DPD_ENUMERATION_LIMIT") {
            s.enumeration_limit = v
                .parse()
                .map_err(|e| format!("DPD_ENUMERATION_LIMIT=`{v}`: {e}"))?;
        }
        if let Some(v) = get("DPD_HISTORY_CAPACITY") {
            s.history_capacity = v
                .parse()
                .map_err(|e| format!("DPD_HISTORY_CAPACITY=`{v}`: {e}"))?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn environment_overrides() {
        let s = Settings::from_lookup(|k| match k {
            "DPD_LISTEN" => Some("0.0.0.0:9000".into()),
            "DPD_HISTORY_CAPACITY" => Some("3".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(s.listen.port(), 9000);
        assert_eq!(s.history_capacity, 3);
        assert_eq!(s.enumeration_limit, DEFAULT_ENUMERATION_LIMIT);
        assert!(Settings::from_lookup(|_| Some("x".into())).is_err());
    }
}
