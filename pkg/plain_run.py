"""
plain_run.py
------
Running the pipeline with simple script, for testing purposes.
"""

from wild_ovs.config import load_config
from wild_ovs.pipeline import run_pipeline

def main():
    config_path = r'configs/smoke.json'
    result = run_pipeline(load_config(config_path), verbose=True)
    print(result.metrics)

if __name__ == '__main__':
    main()
