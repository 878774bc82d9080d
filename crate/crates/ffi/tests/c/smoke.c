#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include "hoi_agent.h"

static char *slurp(const char *path) {
  FILE *f = fopen(path, "rb");
  if (!f) return NULL;
  fseek(f, 0, SEEK_END);
  long n = ftell(f);
  fseek(f, 0, SEEK_SET);
  char *buf = malloc((size_t)n + 1);
  fread(buf, 1, (size_t)n, f);
  buf[n] = '\0';
  fclose(f);
  return buf;
}

int main(int argc, char **argv) {
  if (argc != 2) return 2;
  char *text = slurp(argv[1]);
  if (!text) return 3;
  HoiScene *scene = NULL;
  if (hoi_scene_parse(text, &scene) != HOI_STATUS_OK) return 4;
  free(text);

  double rows[8] = {0, 4.636, -3.783, 0.899, 150, 2.7, -7.8, 0.899};
  bool collided = false;
  char *msg = NULL;
  if (hoi_validate_track(scene, "floorlamp", rows, 2, 0.2, &collided, &msg) != HOI_STATUS_OK) return 5;
  if (!collided || !msg || !strstr(msg, "Objects involved in collision")) return 6;
  hoi_string_free(msg);

  double c[3];
  if (hoi_scene_object_center(scene, "nope", c) != HOI_STATUS_ARGUMENT) return 7;
  if (!hoi_last_error()) return 8;

  printf("objects=%zu\n", hoi_scene_object_count(scene));
  hoi_scene_free(scene);
  return 0;
}
