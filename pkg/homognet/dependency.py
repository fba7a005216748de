import logging
from threading import Lock

from homognet.config import get_global_config
from homognet.model.family_service import FamilyService
from homognet.model.model_models import FamilyKind
from homognet.utils.import_utils import get_impl


_logger = logging.getLogger(__name__)
_family_services: dict[FamilyKind, FamilyService] = {}
_lock = Lock()


def get_family_service(kind: FamilyKind) -> FamilyService:
    """Get the service for a family - lazily initializing it the first time it
    is requested. The global config may name a replacement implementation."""
    service = _family_services.get(kind)
    if service is None:
        with _lock:
            service = _family_services.get(kind)
            if service is None:
                service = _create_family_service(kind)
                _family_services[kind] = service
    return service


def reset_family_services() -> None:
    with _lock:
        _family_services.clear()


def _create_family_service(kind: FamilyKind) -> FamilyService:
    default = _FACTORIES[kind]()
    impl_name = get_global_config().families.get(kind.value)
    if impl_name:
        _logger.info(f"Using {impl_name} for the {kind.value} family")
        return get_impl(type(default), impl_name)()
    return default


def _get_matrix_sensing_family_service() -> FamilyService:
    from homognet.model.matrix_sensing_family_service import (
        MatrixSensingFamilyService,
    )

    return MatrixSensingFamilyService()


def _get_structured_sensing_family_service() -> FamilyService:
    from homognet.model.structured_sensing_family_service import (
        StructuredSensingFamilyService,
    )

    return StructuredSensingFamilyService()


def _get_linear_family_service() -> FamilyService:
    from homognet.model.linear_family_service import LinearFamilyService

    return LinearFamilyService()


def _get_relu_family_service() -> FamilyService:
    from homognet.model.relu_family_service import ReluFamilyService

    return ReluFamilyService()


def _get_attention_family_service() -> FamilyService:
    from homognet.model.attention_family_service import AttentionFamilyService

    return AttentionFamilyService()


_FACTORIES = {
    FamilyKind.MATRIX_SENSING: _get_matrix_sensing_family_service,
    FamilyKind.STRUCTURED_MATRIX_SENSING: _get_structured_sensing_family_service,
    FamilyKind.TWO_LAYER_LINEAR: _get_linear_family_service,
    FamilyKind.TWO_LAYER_RELU: _get_relu_family_service,
    FamilyKind.MULTI_HEAD_ATTENTION: _get_attention_family_service,
}
