"""TCP distribution layer: wire codec, slave-provider daemon, remote proxies."""

from .wire import MessageType, PROTOCOL_VERSION  # noqa: F401
from .provider import Provider, ProviderConfig  # noqa: F401
from .client import (  # noqa: F401
    NetworkResolver,
    ProviderClient,
    RemoteSlave,
    discover,
)
