"""Model access, scripted agents, simulation and campaign execution."""

from .agents import ScriptedAgent, SequenceAgent, scripted_agent
from .campaign import CampaignOutcome, derive_seed, load_campaign, load_transcript, run_campaign
from .client import (
    DEFAULT_TEMPERATURES,
    AuthenticationError,
    ChatClient,
    ChatError,
    ConfigurationError,
    ProviderConfig,
    RateLimitError,
    TransportError,
    chat,
)
from .simulation import SimulationResult, Transcript, Turn, run_simulation
