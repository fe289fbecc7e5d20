"""Client and server state of a simulated federation."""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

from ..lora import apply_reswu
from ..model import ModelState, attach_adapters, init_backbone, to_full_finetune
from ..numkit import Tensor
from .config import ExperimentConfig

logger = logging.getLogger(__name__)


@dataclass
class ClientState:
    """One client's private model.

    Attributes:
        client_id: Index k of the client.
        model: Frozen bases, adapters and the client's own head.
        last_loss: Final local-epoch loss of the latest round it trained in.
    """
    client_id: int
    model: ModelState
    last_loss: Optional[float] = None

    def apply_residual(self, w_res: Dict[str, Tensor]) -> None:
        """Fold a distributed residual into this client's frozen bases."""
        for name, residual in w_res.items():
            self.model.bases[name] = apply_reswu(self.model.bases[name], residual)


@dataclass
class ServerState:
    """The server's global model and the federation it coordinates.

    Attributes:
        model: Global evaluation model: bases with every applied residual,
            aggregated factors and the evaluation head.
        clients: Client states in client order.
        strategy: Aggregation strategy of the run.
        pending_residual: Residual computed in the last round, applied by
            the clients at the start of the next one.
    """
    model: ModelState
    clients: List[ClientState]
    strategy: str
    pending_residual: Dict[str, Tensor] = field(default_factory=dict)

    @property
    def train_a(self) -> bool:
        return self.strategy != "ffa"

    def evaluation_models(self, eval_head: str) -> List[ModelState]:
        """Models whose accuracies are averaged for evaluation.

        `average` evaluates the global model with the averaged head; `local`
        evaluates the global representation with each client's own head.
        """
        if eval_head == "average" or self.model.head_weight is None:
            return [self.model]
        return [replace(self.model, head_weight=c.model.head_weight, head_bias=c.model.head_bias)
                for c in self.clients]


def init_server(config: ExperimentConfig, seed: int) -> ServerState:
    """Build the global model and one identical copy per client.

    Raises:
        ConfigurationError: If the placement or rank is invalid.
    """
    model = init_backbone(config.model_config(), seed)
    if config.strategy == "full_finetune":
        model = to_full_finetune(model)
    elif config.uses_adapters:
        attach_adapters(model, config.placement(), config.lora.rank, seed,
                        std=config.lora.init_std, train_a=config.strategy != "ffa")
    clients = [ClientState(client_id=k, model=model.clone()) for k in range(config.clients.num_clients)]
    logger.info(f"Seed {seed}: {config.strategy} model with {len(model.adapters)} adapted matrices, "
                f"{config.clients.num_clients} clients")
    return ServerState(model=model, clients=clients, strategy=config.strategy)
