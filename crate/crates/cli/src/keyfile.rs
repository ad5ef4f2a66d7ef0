// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use aiid_core::{Keypair, PublicKey};
use serde::{Deserialize, Serialize};

use crate::fail::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Developer,
    Authority,
    Attestor,
    Reporter,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Developer => "developer",
            Role::Authority => "authority",
            Role::Attestor => "attestor",
            Role::Reporter => "reporter",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct KeyFileJson {
    role: Role,
    public_key: String,
    secret_key: String,
}

pub struct KeyFile {
    pub role: Role,
    pub keypair: Keypair,
}

impl KeyFile {
    pub fn write(&self, path: &Path, overwrite: bool) -> CliResult<()> {
        if path.exists() && !overwrite {
            return Err(CliError::input(format!("{} exists; pass --force to replace it", path.display())));
        }
        let json = KeyFileJson {
            role: self.role,
            public_key: self.keypair.public().to_hex(),
            secret_key: hex::encode(self.keypair.secret_bytes()),
        };
        let text = serde_json::to_string_pretty(&json).expect("key file serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
        restrict_permissions(path);
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("reading key file {}: {e}", path.display())))?;
        let json: KeyFileJson =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("key file {}: {e}", path.display())))?;
        let mut secret = [0u8; 32];
        hex::decode_to_slice(&json.secret_key, &mut secret)
            .map_err(|e| CliError::input(format!("key file {}: secret_key: {e}", path.display())))?;
        let keypair = Keypair::from_secret(secret);
        let stated = PublicKey::from_str(&json.public_key)
            .map_err(|e| CliError::input(format!("key file {}: public_key: {e}", path.display())))?;
        if stated != keypair.public() {
            return Err(CliError::input(format!(
                "key file {}: public_key does not match secret_key",
                path.display()
            )));
        }
        Ok(Self { role: json.role, keypair })
    }

    pub fn require(self, allowed: &[Role]) -> CliResult<Self> {
        if allowed.contains(&self.role) {
            Ok(self)
        } else {
            let want: Vec<String> = allowed.iter().map(Role::to_string).collect();
            Err(CliError::input(format!(
                "key role is {}, this command needs {}",
                self.role,
                want.join(" or ")
            )))
        }
    }
}

#[cfg(unix)]
fn restrict_permissions(path: &Path) {
    use std::os::unix::fs::PermissionsExt;
    let _ = std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o600));
}

#[cfg(not(unix))]
fn restrict_permissions(_: &Path) {}
