"""Publishing and discovery of Web Services hosted on Mobile Hosts in a simulated P2P overlay."""

from .adverts import (
    Advertisement,
    AdvertisementCache,
    AdvKind,
    ModuleClassBody,
    ModuleImplBody,
    ModuleSpecBody,
    PeerBody,
    PeerGroup,
    deserialize_adv,
    serialize_adv,
)
from .context import (
    CapabilitySignature,
    ClientContext,
    ConceptOntology,
    ContextProfile,
    MatchDegree,
    MatchParams,
    build_services_graph,
    context_match,
    rank_final,
)
from .discovery import MatchRecord, Query, discover, fetch_spec, match_local
from .ids import PeerId
from .mediation import PipelineTrace, Simulation, restore_caches, run_scenario, select_and_invoke, snapshot_caches
from .overlay import ChurnSpec, MessageKind, Overlay, Role, apply_churn, create_overlay, rebind_endpoint, route
from .publishing import auto_republish, categorize, publish_service
from .ranking import build_corpus, cosine_rank, filter_to_ams, tfidf_weight
from .scenario import ScenarioConfig, load_scenario
from .wsdl import WsdlDescriptor, WsdlOperation

__version__ = "0.1.0"
