/* C interface to the speedplan library.
 *
 * All objects are opaque handles created by a create, load or run call and
 * released with the matching free function. Functions return an sp_status; on
 * failure sp_last_error() describes the problem. The message is stored per
 * thread and stays valid until the next failing call on that thread.
 */
#ifndef SPEEDPLAN_H
#define SPEEDPLAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(SPEEDPLAN_BUILDING)
#define SP_API __attribute__((visibility("default")))
#else
#define SP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sp_status {
  SP_OK = 0,
  SP_ERR_INVALID_ARGUMENT = 1,
  SP_ERR_CONFIG = 2,
  SP_ERR_IO = 3,
  SP_ERR_SHAPE_MISMATCH = 4,
  SP_ERR_INVALID_WORLD = 5,
  SP_ERR_VEHICLE_INSIDE_OBSTACLE = 6,
  SP_ERR_STEPPED_AFTER_DONE = 7,
  SP_ERR_PLACEMENT_FAILED = 8,
  SP_ERR_CONTRADICTORY_OUTCOME = 9,
  SP_ERR_BUFFER_TOO_SMALL = 10,
  SP_ERR_INTERRUPTED = 11,
  SP_ERR_INTERNAL = 99
} sp_status;

typedef enum sp_reward_kind { SP_REWARD_PLAIN = 0, SP_REWARD_COUPLED = 1 } sp_reward_kind;

typedef enum sp_done_reason {
  SP_RUNNING = 0,
  SP_DONE_COLLISION = 1,
  SP_DONE_GOAL = 2,
  SP_DONE_TIMEOUT = 3
} sp_done_reason;

SP_API const char* sp_version(void);
SP_API const char* sp_status_name(sp_status status);
SP_API const char* sp_last_error(void);

/* Asks running training loops to stop; they fail with SP_ERR_INTERRUPTED.
 * Safe to call from a signal handler. The request persists until cleared. */
SP_API void sp_request_interrupt(void);
SP_API void sp_clear_interrupt(void);

/* ---- Experiment configuration ---------------------------------------- */

typedef struct sp_experiment sp_experiment;

SP_API sp_status sp_experiment_create_default(sp_experiment** out);
SP_API sp_status sp_experiment_load(const char* path, sp_experiment** out);
SP_API sp_status sp_experiment_parse(const char* json_text, sp_experiment** out);
SP_API void sp_experiment_free(sp_experiment* experiment);

SP_API sp_status sp_experiment_set_seed(sp_experiment* experiment, uint64_t seed);
/* "dqn" or "ddqn". */
SP_API sp_status sp_experiment_set_algorithm(sp_experiment* experiment, const char* name);
SP_API sp_status sp_experiment_set_output_dir(sp_experiment* experiment, const char* dir);
/* Valid until the experiment is modified or freed. */
SP_API const char* sp_experiment_output_dir(const sp_experiment* experiment);
SP_API int sp_experiment_n_eval(const sp_experiment* experiment);
SP_API size_t sp_experiment_observation_size(const sp_experiment* experiment);
SP_API size_t sp_experiment_environment_count(const sp_experiment* experiment);
SP_API const char* sp_experiment_environment_name(const sp_experiment* experiment, size_t index);
/* Writes the effective configuration (defaults filled in) as JSON. */
SP_API sp_status sp_experiment_save(const sp_experiment* experiment, const char* path);

/* ---- Agents ------------------------------------------------------------ */

typedef struct sp_agent sp_agent;

/* Trains with the experiment's reward kind on the named environment (NULL
 * selects the first one). Progress lines go to `log` when non-NULL. */
typedef void (*sp_log_fn)(const char* line, void* user);
SP_API sp_status sp_train(const sp_experiment* experiment, const char* environment,
                          sp_log_fn log, void* user, sp_agent** out);
/* Writes <stem>.bin, <stem>.json and, for trained agents, <stem>_curve.json. */
SP_API sp_status sp_agent_save(const sp_agent* agent, const sp_experiment* experiment,
                               const char* stem);
/* Accepts the .bin path or the stem. */
SP_API sp_status sp_agent_load(const char* path, sp_agent** out);
SP_API void sp_agent_free(sp_agent* agent);
SP_API size_t sp_agent_input_size(const sp_agent* agent);
SP_API size_t sp_agent_output_size(const sp_agent* agent);
SP_API sp_status sp_agent_q_values(const sp_agent* agent, const double* observation,
                                   size_t observation_size, double* q_out, size_t q_capacity);
SP_API sp_status sp_agent_greedy_action(const sp_agent* agent, const double* observation,
                                        size_t observation_size, int* action_out);

/* ---- Evaluation -------------------------------------------------------- */

typedef struct sp_eval sp_eval;

typedef struct sp_eval_summary {
  int episodes;
  double success_rate;
  double collision_rate;
  double timeout_rate;
  double mean_speed;
  double mean_distance_over_time;
} sp_eval_summary;

/* Greedy episodes on the environment's evaluation worlds. Fails with
 * SP_ERR_SHAPE_MISMATCH when the agent and experiment disagree on the
 * observation size. */
SP_API sp_status sp_evaluate(const sp_experiment* experiment, const sp_agent* agent,
                             const char* environment, int episodes, sp_eval** out);
SP_API void sp_eval_free(sp_eval* eval);
SP_API sp_eval_summary sp_eval_get_summary(const sp_eval* eval);
SP_API double sp_eval_episode_speed(const sp_eval* eval, size_t episode);
SP_API sp_done_reason sp_eval_episode_outcome(const sp_eval* eval, size_t episode);
/* Per episode: <dir>/<prefix>_NNN.csv, _NNN_plot.json and _NNN_world.json. */
SP_API sp_status sp_eval_export(const sp_eval* eval, const char* dir, const char* prefix);

/* ---- Reward comparison --------------------------------------------------- */

typedef struct sp_results sp_results;

typedef struct sp_cell {
  const char* environment;
  sp_reward_kind reward_kind;
  int n;
  double mean_speed;
  double success_rate;
  double collision_rate;
  double timeout_rate;
  double mean_distance_over_time;
  uint64_t training_seed;
  const char* error; /* NULL unless the cell failed */
} sp_cell;

typedef void (*sp_cell_fn)(const sp_cell* cell, void* user);

/* Runs every (environment, reward kind) cell. Returns SP_OK even when some
 * cells failed; check sp_results_complete. */
SP_API sp_status sp_compare(const sp_experiment* experiment, sp_cell_fn on_cell, void* user,
                            sp_results** out);
SP_API void sp_results_free(sp_results* results);
SP_API int sp_results_complete(const sp_results* results);
SP_API size_t sp_results_cell_count(const sp_results* results);
/* Strings in the cell stay valid while `results` lives. */
SP_API sp_status sp_results_cell(const sp_results* results, size_t index, sp_cell* out);
/* Writes results.json, results.csv, episodes.csv and per-episode
 * trajectories under `dir`. */
SP_API sp_status sp_results_write(const sp_results* results, const sp_experiment* experiment,
                                  const char* dir);

/* ---- Low-level simulation ------------------------------------------------ */

typedef struct sp_world sp_world;

typedef struct sp_step_result {
  double reward;
  int done;
  sp_done_reason reason;
  int collided;
  int reached;
  double speed;
  int has_deviation;
  double deviation;
} sp_step_result;

/* Random world for the named environment and seed. */
SP_API sp_status sp_world_generate(const sp_experiment* experiment, const char* environment,
                                   uint64_t seed, sp_world** out);
SP_API sp_status sp_world_from_json(const sp_experiment* experiment, const char* json_text,
                                    sp_world** out);
SP_API void sp_world_free(sp_world* world);
SP_API sp_status sp_world_reset(sp_world* world, double* observation_out, size_t capacity);
/* action in [0, 9); the reward uses the experiment's reward kind. */
SP_API sp_status sp_world_step(sp_world* world, int action, double* observation_out,
                               size_t capacity, sp_step_result* result_out);
SP_API sp_status sp_world_pose(const sp_world* world, double* x, double* y, double* heading);

/* ---- Rewards --------------------------------------------------------------- */

SP_API sp_status sp_plain_reward(int collided, int reached, double* out);
/* has_deviation = 0 means no obstacle within sensing range. */
SP_API sp_status sp_coupled_reward(int collided, double speed, double expected_speed,
                                   int has_deviation, double deviation, double* out);

#ifdef __cplusplus
}
#endif

#endif
