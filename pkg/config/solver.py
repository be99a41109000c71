"""
Solver configuration
Environment defaults for tolerances, restarts, seeding and output
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class SolverConfig:

    def __init__(self):
        self.tol_gmres = self._float('VSIE_TOL_GMRES', 1e-5)
        self.gmres_restart = self._int('VSIE_GMRES_RESTART', 50)
        self.gmres_max_cycles = self._int('VSIE_GMRES_MAX_CYCLES', 100)
        self.tol_tt = self._float('VSIE_TOL_TT', 1e-3)
        self.tol_aca = self._float('VSIE_TOL_ACA', 1e-3)
        self.tol_tucker = self._float('VSIE_TOL_TUCKER', 1e-5)
        self.seed = self._int('VSIE_SEED', 0)
        self.workers = self._int('VSIE_WORKERS', 1)
        self.dense_limit = self._int('VSIE_DENSE_LIMIT', 20000)
        self.output_dir = os.getenv('VSIE_OUTPUT_DIR', 'output')

    @staticmethod
    def _float(name, default):
        value = os.getenv(name)
        try:
            return float(value) if value not in (None, '') else default
        except ValueError:
            return value

    @staticmethod
    def _int(name, default):
        value = os.getenv(name)
        try:
            return int(value) if value not in (None, '') else default
        except ValueError:
            return value

    def as_dict(self):
        """Solver settings keyed as in the scene document's solver section"""
        return {
            'tol_gmres': self.tol_gmres,
            'restart': self.gmres_restart,
            'max_cycles': self.gmres_max_cycles,
            'tol_tt': self.tol_tt,
            'tol_aca': self.tol_aca,
            'tol_tucker': self.tol_tucker,
            'seed': self.seed,
            'workers': self.workers,
            'dense_limit': self.dense_limit,
        }

    def test_config(self):
        """Test if configuration values are usable"""
        invalid = []
        for name in ('tol_gmres', 'tol_tt', 'tol_aca', 'tol_tucker'):
            value = getattr(self, name)
            if not isinstance(value, float) or value <= 0:
                invalid.append(name)
        for name in ('gmres_restart', 'gmres_max_cycles', 'workers', 'dense_limit'):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                invalid.append(name)
        if not isinstance(self.seed, int):
            invalid.append('seed')

        if invalid:
            print(f"Invalid solver config: {', '.join(invalid)}")
            return False

        print("Solver configuration looks good!")
        return True


if __name__ == "__main__":
    # Test the configuration
    config = SolverConfig()
    config.test_config()
    print(f"Settings: {config.as_dict()}")
