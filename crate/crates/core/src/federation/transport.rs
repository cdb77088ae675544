//! Message transports. Training results must be independent of which
//! transport carries the messages; the wire transport exists to prove that.

use super::codec::{decode_message, encode_message};
use super::messages::Message;
use super::FedError;

/// Carries a message from sender to receiver. Implementations must be
/// shareable across client workers.
pub trait Transport: Sync {
    fn deliver(&self, msg: Message) -> Result<Message, FedError>;
}

/// Hands the message over untouched.
pub struct InProcess;

impl Transport for InProcess {
    fn deliver(&self, msg: Message) -> Result<Message, FedError> {
        Ok(msg)
    }
}

/// Serializes every message to wire bytes and parses it back, so any codec
/// lossiness would surface as a behavioral difference.
pub struct WireRoundTrip;

impl Transport for WireRoundTrip {
    fn deliver(&self, msg: Message) -> Result<Message, FedError> {
        Ok(decode_message(&encode_message(&msg))?)
    }
}
