//! Everything a session can refer to: environments, patterns and the shared
//! tangible registry.

use std::path::Path;

use thiserror::Error;

use crate::pattern::{LibraryError, PatternLibrary, PatternProgram};
use crate::scene::{load_environment, ConfigError, Environment};
use crate::tangible::{RegistrationError, TangibleRegistry, TangibleSpec};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("at least one environment is required")]
    NoEnvironment,
    #[error("duplicate environment id {0}")]
    DuplicateEnvironment(String),
    #[error("environment {env}, field {field}: unknown pattern {pattern}")]
    UnknownPattern {
        env: String,
        field: String,
        pattern: String,
    },
    #[error("tangible {0} is defined differently in two environments")]
    TangibleConflict(String),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error("{path}: {source}")]
    Config {
        path: String,
        #[source]
        source: ConfigError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] LibraryError),
}

#[derive(Clone, Debug)]
pub struct Catalog {
    environments: Vec<Environment>,
    patterns: PatternLibrary,
    registry: TangibleRegistry<f64>,
}

impl Catalog {
    /// Cross-checks environments against the pattern library and merges
    /// their tangibles into one registry. The first environment is the
    /// session's starting environment.
    pub fn new(environments: Vec<Environment>, patterns: PatternLibrary) -> Result<Self, CatalogError> {
        if environments.is_empty() {
            return Err(CatalogError::NoEnvironment);
        }
        let mut registry = TangibleRegistry::new();
        for (i, env) in environments.iter().enumerate() {
            if environments[..i].iter().any(|e| e.id == env.id) {
                return Err(CatalogError::DuplicateEnvironment(env.id.clone()));
            }
            for field in &env.fields {
                for pattern in &field.allowed_pattern_ids {
                    if !patterns.contains(pattern) {
                        return Err(CatalogError::UnknownPattern {
                            env: env.id.clone(),
                            field: field.id.clone(),
                            pattern: pattern.clone(),
                        });
                    }
                }
            }
            for spec in &env.tangibles {
                match registry.get(spec.id()) {
                    Some(existing) if existing == spec => {}
                    Some(_) => return Err(CatalogError::TangibleConflict(spec.id().to_owned())),
                    None => {
                        registry.register(spec.clone())?;
                    }
                }
            }
        }
        Ok(Self {
            environments,
            patterns,
            registry,
        })
    }

    /// Loads environment files and a pattern directory.
    pub fn load(env_paths: &[impl AsRef<Path>], pattern_dir: &Path) -> Result<Self, CatalogError> {
        let mut envs = Vec::new();
        for path in env_paths {
            let path = path.as_ref();
            let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
                path: path.display().to_string(),
                source,
            })?;
            envs.push(load_environment(&text).map_err(|source| CatalogError::Config {
                path: path.display().to_string(),
                source,
            })?);
        }
        let patterns = PatternLibrary::load_dir(pattern_dir)?;
        Self::new(envs, patterns)
    }

    pub fn default_environment(&self) -> &Environment {
        &self.environments[0]
    }

    pub fn environment(&self, id: &str) -> Option<&Environment> {
        self.environments.iter().find(|e| e.id == id)
    }

    pub fn environments(&self) -> &[Environment] {
        &self.environments
    }

    pub fn patterns(&self) -> &PatternLibrary {
        &self.patterns
    }

    pub fn pattern(&self, id: &str) -> Option<&PatternProgram> {
        self.patterns.get(id)
    }

    pub fn registry(&self) -> &TangibleRegistry<f64> {
        &self.registry
    }

    pub fn tangible(&self, id: &str) -> Option<&TangibleSpec<f64>> {
        self.registry.get(id)
    }
}
