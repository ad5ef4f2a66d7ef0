// SPDX-License-Identifier: Apache-2.0

//! Blocking client for the registry HTTP API.

use std::time::Duration;

use aiid_server::ErrorBody;
use reqwest::blocking::{Client, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::fail::{CliError, CliResult};

pub struct Registry {
    base: String,
    http: Client,
}

impl Registry {
    pub fn new(base: &str) -> CliResult<Self> {
        let http = Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| CliError::server(format!("http client: {e}")))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_owned(),
            http,
        })
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> CliResult<T> {
        let resp = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .map_err(|e| transport(&self.base, e))?;
        decode(resp)
    }

    pub fn post<T: DeserializeOwned>(&self, path: &str, body: &impl Serialize) -> CliResult<T> {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .map_err(|e| transport(&self.base, e))?;
        decode(resp)
    }
}

fn transport(base: &str, e: reqwest::Error) -> CliError {
    CliError::server(format!("cannot reach registry at {base}: {e}"))
}

fn decode<T: DeserializeOwned>(resp: Response) -> CliResult<T> {
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| CliError::server(format!("reading response: {e}")))?;
    if status.is_success() {
        serde_json::from_str(&text).map_err(|e| CliError::server(format!("unexpected response: {e}")))
    } else {
        // rejection echoed verbatim
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => Err(CliError::server(format!("{} ({}): {}", b.error, status.as_u16(), b.detail))),
            Err(_) => Err(CliError::server(format!("HTTP {}: {text}", status.as_u16()))),
        }
    }
}
