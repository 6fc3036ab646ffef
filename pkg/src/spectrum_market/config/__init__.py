from .solver_config import SolverSettings, get_settings

__all__ = ['SolverSettings', 'get_settings']
