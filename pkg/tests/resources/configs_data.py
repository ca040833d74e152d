tiny_ars = {
    "n_directions": 4,
    "top_b": 2,
    "max_iters": 2,
    "reward_rollouts": 2,
    "eval_rollouts_train": 8,
}

tiny_experiment = {
    "benchmark": "reach_moving_init",
    "train": [0, 1],
    "hidden_dims": [4, 4],
    "n_particles": 8,
    "test_rollouts": 8,
    "test_steps": 20,
    "max_unseen_probes": 2,
    "trajectories_per_instance": 1,
}

experiment_section = {
    "benchmark": "choice",
    "train_size": 6,
    "modes": ["genrl", "base2"],
    "seeds": [0, 1, 2],
}
