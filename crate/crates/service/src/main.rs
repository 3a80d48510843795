use mouldprint_service::{serve, ServiceConfig};

#[tokio::main]
async fn main() {
    let config = match ServiceConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    eprintln!("mouldprint-service listening on port {}", config.port);
    if let Err(e) = serve(config).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
